//! LLM workers: one prompt per (node, tie configuration), answered through
//! a cached, budgeted chat client or the synthetic oracle.

pub mod budget;
pub mod cache;
pub mod client;
pub mod oracle;
pub mod parse;
pub mod prompt;

use std::collections::HashSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use log::{debug, warn};
use serde::{Deserialize, Serialize};

pub use budget::{estimate_tokens, BudgetState};
pub use cache::{CacheRecord, ResponseCache};
pub use client::{ChatClient, ChatRequest, ChatResponse, HttpChatClient};
pub use oracle::synthetic_oracle;
pub use parse::parse_response;
pub use prompt::{build_prompt, PromptSpec, TruncationPolicy};

use crate::error::{Error, Result};
use crate::graph::NodeId;

/// Label recorded when a response could not be parsed.
pub const UNPARSEABLE: &str = "UNPARSEABLE";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Guess {
    pub label: String,
    /// 0..=100
    pub confidence: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkerAnnotation {
    pub center: NodeId,
    pub config_k: usize,
    pub guesses: Vec<Guess>,
    pub raw_response: String,
    pub tokens_in: u64,
    pub tokens_out: u64,
    pub from_cache: bool,
    #[serde(default)]
    pub unparseable: bool,
}

impl WorkerAnnotation {
    pub fn top1(&self) -> Option<&Guess> {
        if self.unparseable {
            None
        } else {
            self.guesses.first()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatorSettings {
    pub model: String,
    pub temperature: f64,
    pub max_output_tokens: u64,
    pub retries: usize,
    pub backoff_base: Duration,
    /// Requests per second; `None` disables rate limiting.
    pub rate_limit: Option<f64>,
}

impl Default for AnnotatorSettings {
    fn default() -> Self {
        AnnotatorSettings {
            model: "gpt-3.5-turbo".into(),
            temperature: 0.0,
            max_output_tokens: 256,
            retries: 3,
            backoff_base: Duration::from_secs(1),
            rate_limit: None,
        }
    }
}

/// Token bucket holding at most one second's worth of requests.
struct TokenBucket {
    rate: f64,
    state: Mutex<(f64, Instant)>,
}

impl TokenBucket {
    fn new(rate: f64) -> Self {
        TokenBucket {
            rate,
            state: Mutex::new((rate.max(1.0), Instant::now())),
        }
    }

    fn acquire(&self) {
        loop {
            let wait = {
                let mut s = self.state.lock().unwrap_or_else(|e| e.into_inner());
                let now = Instant::now();
                let refill = now.duration_since(s.1).as_secs_f64() * self.rate;
                s.0 = (s.0 + refill).min(self.rate.max(1.0));
                s.1 = now;
                if s.0 >= 1.0 {
                    s.0 -= 1.0;
                    return;
                }
                (1.0 - s.0) / self.rate
            };
            thread::sleep(Duration::from_secs_f64(wait));
        }
    }
}

/// Cache-first annotator. With no client it only replays the cache.
pub struct Annotator<'c> {
    client: Option<&'c dyn ChatClient>,
    cache: Mutex<ResponseCache>,
    budget: Mutex<BudgetState>,
    settings: AnnotatorSettings,
    limiter: Option<TokenBucket>,
    requests: AtomicUsize,
}

impl<'c> Annotator<'c> {
    pub fn new(
        client: Option<&'c dyn ChatClient>,
        cache: ResponseCache,
        budget: BudgetState,
        settings: AnnotatorSettings,
    ) -> Self {
        let limiter = settings.rate_limit.filter(|r| *r > 0.0).map(TokenBucket::new);
        Annotator {
            client,
            cache: Mutex::new(cache),
            budget: Mutex::new(budget),
            settings,
            limiter,
            requests: AtomicUsize::new(0),
        }
    }

    /// Network requests issued so far (including failed attempts).
    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }

    pub fn budget(&self) -> BudgetState {
        self.budget.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn settings(&self) -> &AnnotatorSettings {
        &self.settings
    }

    fn finish(prompt: &PromptSpec, raw: String, tokens_in: u64, tokens_out: u64, from_cache: bool) -> WorkerAnnotation {
        let (guesses, unparseable) = match parse_response(&raw, &prompt.category_list) {
            Ok(g) => (g, false),
            Err(_) => {
                warn!("unparseable response for node {} config {}", prompt.center, prompt.config_k);
                (
                    vec![Guess {
                        label: UNPARSEABLE.into(),
                        confidence: 0,
                    }],
                    true,
                )
            }
        };
        WorkerAnnotation {
            center: prompt.center,
            config_k: prompt.config_k,
            guesses,
            raw_response: raw,
            tokens_in,
            tokens_out,
            from_cache,
            unparseable,
        }
    }

    pub fn annotate(&self, prompt: &PromptSpec) -> Result<WorkerAnnotation> {
        if let Some(rec) = self
            .cache
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .get(&prompt.prompt_hash)
        {
            return Ok(Self::finish(
                prompt,
                rec.raw_response.clone(),
                rec.tokens_in,
                rec.tokens_out,
                true,
            ));
        }
        let Some(client) = self.client else {
            return Err(Error::CacheMiss(prompt.prompt_hash.clone()));
        };

        let projected = {
            let mut b = self.budget.lock().unwrap_or_else(|e| e.into_inner());
            let p = b.cost(estimate_tokens(&prompt.body), self.settings.max_output_tokens);
            b.reserve(p)?;
            p
        };

        let req = ChatRequest {
            model: self.settings.model.clone(),
            prompt: prompt.body.clone(),
            temperature: self.settings.temperature,
            max_tokens: self.settings.max_output_tokens,
        };
        let mut last_err = String::new();
        let attempts = self.settings.retries + 1;
        for attempt in 0..attempts {
            if attempt > 0 {
                let backoff = self.settings.backoff_base * 2u32.pow(attempt as u32 - 1);
                debug!("retry {attempt} after {backoff:?}: {last_err}");
                thread::sleep(backoff);
            }
            if let Some(l) = &self.limiter {
                l.acquire();
            }
            self.requests.fetch_add(1, Ordering::SeqCst);
            match client.complete(&req) {
                Ok(resp) => {
                    let tokens_in = resp.tokens_in.unwrap_or_else(|| estimate_tokens(&prompt.body));
                    let tokens_out = resp.tokens_out.unwrap_or_else(|| estimate_tokens(&resp.content));
                    {
                        let mut b = self.budget.lock().unwrap_or_else(|e| e.into_inner());
                        let actual = b.cost(tokens_in, tokens_out);
                        b.settle(projected, actual);
                    }
                    self.cache.lock().unwrap_or_else(|e| e.into_inner()).insert(CacheRecord::now(
                        prompt.prompt_hash.clone(),
                        self.settings.model.clone(),
                        prompt.body.clone(),
                        resp.content.clone(),
                        tokens_in,
                        tokens_out,
                    ))?;
                    return Ok(Self::finish(prompt, resp.content, tokens_in, tokens_out, false));
                }
                Err(e) => last_err = e,
            }
        }
        self.budget
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .release(projected);
        Err(Error::Transport {
            attempts,
            msg: last_err,
        })
    }

    /// Annotates every prompt with at most `max_inflight` concurrent
    /// requests. Results keep the input order. Prompts sharing a hash are
    /// sent once; repeats are served from the cache afterwards.
    pub fn annotate_all(&self, prompts: &[PromptSpec], max_inflight: usize) -> Vec<Result<WorkerAnnotation>> {
        let mut seen = HashSet::new();
        let (first, repeats): (Vec<usize>, Vec<usize>) =
            (0..prompts.len()).partition(|&i| seen.insert(prompts[i].prompt_hash.as_str()));

        let workers = max_inflight.max(1).min(first.len().max(1));
        let next = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<Result<WorkerAnnotation>>>> =
            prompts.iter().map(|_| Mutex::new(None)).collect();
        thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let j = next.fetch_add(1, Ordering::SeqCst);
                    let Some(&i) = first.get(j) else { break };
                    let r = self.annotate(&prompts[i]);
                    *slots[i].lock().unwrap_or_else(|e| e.into_inner()) = Some(r);
                });
            }
        });
        for i in repeats {
            *slots[i].lock().unwrap_or_else(|e| e.into_inner()) = Some(self.annotate(&prompts[i]));
        }
        slots
            .into_iter()
            .map(|m| {
                m.into_inner()
                    .unwrap_or_else(|e| e.into_inner())
                    .expect("every slot filled")
            })
            .collect()
    }
}
