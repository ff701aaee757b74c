use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::graph::{HomophilyTie, NodeId, Role};

/// Caps on how much neighbor text goes into one prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TruncationPolicy {
    pub max_neighbors_per_role: usize,
    pub neighbor_chars: usize,
    pub center_chars: usize,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy {
            max_neighbors_per_role: 5,
            neighbor_chars: 600,
            center_chars: 1200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub center: NodeId,
    pub config_k: usize,
    pub body: String,
    pub category_list: Vec<String>,
    pub guess_count: usize,
    pub prompt_hash: String,
}

/// Hex SHA-256 over model name and prompt body.
pub fn prompt_hash(model: &str, body: &str) -> String {
    let mut h = Sha256::new();
    h.update(model.as_bytes());
    h.update([0u8]);
    h.update(body.as_bytes());
    hex::encode(h.finalize())
}

fn truncate(text: &str, max_chars: usize) -> &str {
    match text.char_indices().nth(max_chars) {
        Some((idx, _)) => &text[..idx],
        None => text,
    }
}

/// Relation clause for each non-center role, in prompt order.
const CLAUSES: [(Role, &str); 6] = [
    (Role::Pred, "which is cited by the paper(s) that"),
    (Role::Succ, "which cites the paper(s) that"),
    (Role::PredOfPred, "which is cited by papers that are in turn cited by the paper(s) that"),
    (Role::PredOfSucc, "which cites papers that are also cited by the paper(s) that"),
    (Role::SuccOfPred, "which is cited by papers that also cite the paper(s) that"),
    (Role::SuccOfSucc, "which cites papers that in turn cite the paper(s) that"),
];

/// Renders the annotation prompt for one homophily tie.
///
/// `texts` is indexed by node id.
pub fn build_prompt(
    tie: &HomophilyTie,
    texts: &[String],
    class_names: &[String],
    policy: &TruncationPolicy,
    model: &str,
) -> PromptSpec {
    let mut body = String::from("The content of the paper is ");
    body.push_str(truncate(&texts[tie.center], policy.center_chars));

    for (role, clause) in CLAUSES {
        let chosen: Vec<&str> = tie
            .with_role(role)
            .take(policy.max_neighbors_per_role)
            .map(|u| truncate(&texts[u], policy.neighbor_chars))
            .collect();
        if chosen.is_empty() {
            continue;
        }
        body.push_str(", ");
        body.push_str(clause);
        body.push(' ');
        body.push_str(&chosen.join("; "));
    }

    let guess_count = class_names.len();
    body.push_str(". There are following categories: ");
    body.push_str(&class_names.join(", "));
    body.push_str(".\n");
    body.push_str(&format!(
        "What's the category of this paper? Provide your {guess_count} best guesses and a \
         confidence number that each is correct (0 to 100) for the following question from \
         the most probable to the least. The sum of all confidence should be 100. For example, \
         [{{\"answer\": <your_first_answer>, \"confidence\": <confidence_for_first_answer>}}, ...]"
    ));

    PromptSpec {
        center: tie.center,
        config_k: tie.config_k,
        prompt_hash: prompt_hash(model, &body),
        body,
        category_list: class_names.to_vec(),
        guess_count,
    }
}
