//! Tolerant extraction of `[{"answer": .., "confidence": ..}, ..]` lists
//! from free-form model output.

use serde_json::Value;

use super::Guess;
use crate::error::{Error, Result};

/// Case-, space- and underscore-insensitive form used for class matching.
fn canonical(s: &str) -> String {
    s.trim()
        .chars()
        .filter(|c| !matches!(c, ' ' | '_' | '-' | '"' | '\''))
        .flat_map(char::to_lowercase)
        .collect()
}

fn confidence_of(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.trim().trim_end_matches('%').trim().parse().ok(),
        _ => None,
    }
}

/// `Some` if `v` is a non-empty array of objects carrying an `answer`.
fn as_answer_list(v: &Value) -> Option<Vec<(String, Option<f64>)>> {
    let items = v.as_array()?;
    if items.is_empty() {
        return None;
    }
    items
        .iter()
        .map(|item| {
            let obj = item.as_object()?;
            let answer = match obj.get("answer")? {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            Some((answer, obj.get("confidence").and_then(confidence_of)))
        })
        .collect()
}

/// Finds the first JSON array of answer objects in `raw`.
fn first_answer_array(raw: &str) -> Option<Vec<(String, Option<f64>)>> {
    raw.match_indices('[').find_map(|(start, _)| {
        let mut stream = serde_json::Deserializer::from_str(&raw[start..]).into_iter::<Value>();
        match stream.next() {
            Some(Ok(v)) => as_answer_list(&v),
            _ => None,
        }
    })
}

/// Extracts ranked guesses.
///
/// Labels are matched to `class_names` ignoring case, spaces, underscores and
/// hyphens; unknown labels are dropped. Confidences are rounded and clamped
/// to `0..=100`, a missing confidence counts as 0.
pub fn parse_response(raw: &str, class_names: &[String]) -> Result<Vec<Guess>> {
    let list = first_answer_array(raw).ok_or(Error::UnparseableResponse)?;
    let canon: Vec<String> = class_names.iter().map(|c| canonical(c)).collect();
    let guesses: Vec<Guess> = list
        .into_iter()
        .filter_map(|(answer, conf)| {
            let key = canonical(&answer);
            let idx = canon.iter().position(|c| *c == key)?;
            let conf = conf.filter(|c| c.is_finite()).unwrap_or(0.0);
            Some(Guess {
                label: class_names[idx].clone(),
                confidence: conf.round().clamp(0.0, 100.0) as u32,
            })
        })
        .collect();
    if guesses.is_empty() {
        return Err(Error::UnparseableResponse);
    }
    Ok(guesses)
}

/// Byte-level entry point; invalid UTF-8 is replaced before parsing.
pub fn parse_response_bytes(raw: &[u8], class_names: &[String]) -> Result<Vec<Guess>> {
    parse_response(&String::from_utf8_lossy(raw), class_names)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn classes() -> Vec<String> {
        ["Theory", "Rule_Learning", "Neural_Networks"].map(String::from).to_vec()
    }

    fn g(label: &str, confidence: u32) -> Guess {
        Guess {
            label: label.into(),
            confidence,
        }
    }

    #[test]
    fn plain_array() {
        let raw = r#"[{"answer":"Theory","confidence":60},{"answer":"Rule Learning","confidence":40}]"#;
        assert_eq!(
            parse_response(raw, &classes()).unwrap(),
            vec![g("Theory", 60), g("Rule_Learning", 40)]
        );
    }

    #[test]
    fn fenced_with_prose() {
        let raw = "Sure! Here are my guesses:\n```json\n[{\"answer\": \"Theory\", \"confidence\": 60},\n {\"answer\": \"rule learning\", \"confidence\": 40}]\n```\nHope that helps.";
        assert_eq!(
            parse_response(raw, &classes()).unwrap(),
            vec![g("Theory", 60), g("Rule_Learning", 40)]
        );
    }

    #[test]
    fn unknown_label_only_fails() {
        let raw = r#"[{"answer":"Quantum","confidence":100}]"#;
        assert!(matches!(parse_response(raw, &classes()), Err(Error::UnparseableResponse)));
        assert!(parse_response("no json here", &classes()).is_err());
        assert!(parse_response("[1, 2, 3]", &classes()).is_err());
    }

    #[test]
    fn skips_non_answer_arrays_and_clamps() {
        let raw = r#"refs [1] then [{"answer":"NEURAL_NETWORKS","confidence":"130%"},{"answer":"Theory","confidence":-5},{"answer":"Theory"}]"#;
        assert_eq!(
            parse_response(raw, &classes()).unwrap(),
            vec![g("Neural_Networks", 100), g("Theory", 0), g("Theory", 0)]
        );
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..256)) {
                let _ = parse_response_bytes(&bytes, &classes());
            }

            #[test]
            fn never_panics_on_jsonish(s in r#"[\[\]{}":,0-9a-zA-Z ]{0,80}"#) {
                let _ = parse_response(&s, &classes());
            }
        }
    }
}
