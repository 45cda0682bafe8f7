//! Simulated participants that go through the HTTP API, exactly as a
//! browser client would.

use anyhow::{bail, Context};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::Serialize;
use svolab::experiment::{simulated_choice, ExperimentReport, ListsFile, Policy, Submission, Task, TrialPayload};

use crate::server::{Ack, CreateSession, SessionCreated};

pub struct Client {
    http: reqwest::Client,
    base: String,
}

impl Client {
    pub fn new(base: &str) -> Client {
        Client {
            http: reqwest::Client::new(),
            base: base.trim_end_matches('/').to_string(),
        }
    }

    async fn check<T: DeserializeOwned>(resp: reqwest::Response) -> anyhow::Result<T> {
        let status = resp.status();
        if !status.is_success() {
            let body = resp.text().await.unwrap_or_default();
            bail!("HTTP {status}: {body}");
        }
        Ok(resp.json().await?)
    }

    pub async fn get<T: DeserializeOwned>(&self, path: &str) -> anyhow::Result<T> {
        let resp = self.http.get(format!("{}{path}", self.base)).send().await?;
        Self::check(resp).await.with_context(|| format!("GET {path}"))
    }

    pub async fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> anyhow::Result<T> {
        let resp = self.http.post(format!("{}{path}", self.base)).json(body).send().await?;
        Self::check(resp).await.with_context(|| format!("POST {path}"))
    }

    pub async fn report(&self) -> anyhow::Result<ExperimentReport> {
        self.get("/report").await
    }
}

/// Runs `n` participants against a live server. The lists file supplies
/// what a participant "knows" (the true subject, animacy); the trials
/// themselves come from the server.
pub async fn simulate_remote(
    client: &Client,
    lists: &ListsFile,
    task: Task,
    policy: Policy,
    seed: u64,
    n: usize,
) -> anyhow::Result<Vec<String>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids = Vec::with_capacity(n);
    for _ in 0..n {
        let created: SessionCreated = client
            .post(
                "/sessions",
                &CreateSession {
                    task,
                    seed: Some(rng.gen()),
                },
            )
            .await?;
        let sid = created.session_id;
        for k in 0..created.n_trials {
            let t: TrialPayload = client.get(&format!("/sessions/{sid}/trials/{k}")).await?;
            let item = lists
                .item(&t.item_id)
                .with_context(|| format!("server sent unknown item {}", t.item_id))?;
            let choice = simulated_choice(policy, item, task, &mut rng)?;
            let sub = Submission {
                item_id: t.item_id,
                choice,
                latency_ms: rng.gen_range(400..4000),
            };
            let _: Ack = client.post(&format!("/sessions/{sid}/responses"), &sub).await?;
        }
        ids.push(sid);
    }
    Ok(ids)
}
