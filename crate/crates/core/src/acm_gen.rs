//! Self-collision matrix generation by random sampling.
//!
//! Pairs of links joined by a joint are disabled outright. The default state is
//! checked to tag pairs that already collide there. The remaining pairs are then
//! counted over many random states: pairs that never collided are disabled as
//! `Never`, pairs that (almost) always collided as `Always`.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collision::{links_intersect, AcmEntry, AcmReason, AllowedCollisionMatrix, PairStats};
use crate::kinematics::{default_positions, indexed_rng, link_poses, sample_variables, KinematicsError};
use crate::model::{RobotModel, VariableBounds};

pub const DEFAULT_SAMPLE_COUNT: u64 = 10_000;
pub const MAX_SAMPLE_COUNT: u64 = 100_000;
pub const DEFAULT_ALWAYS_THRESHOLD: f64 = 0.95;

const CAVEAT: &str = "Never entries are inferred from random sampling: a pair that collides only in rare \
configurations may have been missed. Raise sample_count for more confidence.";

#[derive(Debug, Error)]
pub enum AcmGenError {
    #[error("sample_count must be at least 1")]
    NoSamples,
    #[error("always_threshold must lie in (0, 1], got {0}")]
    InvalidThreshold(f64),
    #[error("progress_granularity must be at least 1")]
    InvalidGranularity,
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error("generation was cancelled")]
    Cancelled,
    #[error("no ACM job with id {0}")]
    UnknownJob(u64),
    #[error("an ACM job is already running (id {0})")]
    JobRunning(u64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AcmGenParams {
    pub sample_count: u64,
    pub always_threshold: f64,
    pub seed: u64,
    /// Samples per progress update.
    pub progress_granularity: u64,
}

impl Default for AcmGenParams {
    fn default() -> Self {
        AcmGenParams {
            sample_count: DEFAULT_SAMPLE_COUNT,
            always_threshold: DEFAULT_ALWAYS_THRESHOLD,
            seed: 0,
            progress_granularity: 100,
        }
    }
}

impl AcmGenParams {
    pub fn validate(&self) -> Result<(), AcmGenError> {
        if self.sample_count == 0 {
            return Err(AcmGenError::NoSamples);
        }
        if !(self.always_threshold > 0.0 && self.always_threshold <= 1.0) {
            return Err(AcmGenError::InvalidThreshold(self.always_threshold));
        }
        if self.progress_granularity == 0 {
            return Err(AcmGenError::InvalidGranularity);
        }
        Ok(())
    }
}

/// Outcome for one collidable pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub link1: String,
    pub link2: String,
    /// Random states in which the pair was tested (0 for adjacent pairs).
    pub samples: u64,
    pub collisions: u64,
    /// Collides in the default state.
    pub default_collision: bool,
    pub disabled: bool,
    pub reason: Option<AcmReason>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcmReport {
    pub acm: AllowedCollisionMatrix,
    pub pairs: Vec<PairReport>,
    pub disabled_by_reason: BTreeMap<AcmReason, usize>,
    pub sample_count: u64,
    pub seed: u64,
    pub always_threshold: f64,
    pub note: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub elapsed_s: Option<f64>,
}

impl AcmReport {
    pub fn total_disabled(&self) -> usize {
        self.disabled_by_reason.values().sum()
    }

    pub fn pair(&self, a: &str, b: &str) -> Option<&PairReport> {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        self.pairs.iter().find(|p| p.link1 == a && p.link2 == b)
    }

    /// JSON without the timing field, for byte-level comparisons.
    pub fn to_deterministic_json(&self) -> String {
        let mut r = self.clone();
        r.elapsed_s = None;
        serde_json::to_string_pretty(&r).expect("report serializes")
    }
}

/// Shared progress of a running generation.
#[derive(Debug)]
pub struct AcmProgress {
    total: u64,
    done: AtomicU64,
    cancelled: AtomicBool,
    pairs: Vec<(String, String)>,
    counts: Vec<AtomicU64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProgressSnapshot {
    pub done: u64,
    pub total: u64,
    /// Collisions counted so far per sampled pair.
    pub partial: Vec<PairCount>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairCount {
    pub link1: String,
    pub link2: String,
    pub collisions: u64,
}

impl AcmProgress {
    fn new(total: u64) -> Self {
        AcmProgress {
            total,
            done: AtomicU64::new(0),
            cancelled: AtomicBool::new(false),
            pairs: Vec::new(),
            counts: Vec::new(),
        }
    }

    pub fn snapshot(&self) -> ProgressSnapshot {
        ProgressSnapshot {
            done: self.done.load(Ordering::Acquire),
            total: self.total,
            partial: self
                .pairs
                .iter()
                .zip(&self.counts)
                .map(|((a, b), c)| PairCount {
                    link1: a.clone(),
                    link2: b.clone(),
                    collisions: c.load(Ordering::Relaxed),
                })
                .collect(),
        }
    }

    pub fn cancel(&self) {
        self.cancelled.store(true, Ordering::Release);
    }
}

/// Generates the matrix on the current rayon pool.
pub fn generate_acm(model: &RobotModel, params: &AcmGenParams) -> Result<AcmReport, AcmGenError> {
    let progress = prepare(model, params)?;
    run(model, params, &progress)
}

fn prepare(model: &RobotModel, params: &AcmGenParams) -> Result<AcmProgress, AcmGenError> {
    params.validate()?;
    if let Some(v) = model.variables().iter().find(|v| v.bounds == VariableBounds::Unbounded) {
        return Err(KinematicsError::Unbounded(v.name.clone()).into());
    }
    let mut progress = AcmProgress::new(params.sample_count);
    let adjacent = adjacent_pairs(model);
    for (a, b) in crate::model::collidable_pairs(model) {
        if !adjacent.contains(&(a.clone(), b.clone())) {
            progress.pairs.push((a, b));
            progress.counts.push(AtomicU64::new(0));
        }
    }
    Ok(progress)
}

/// (parent, child) link pairs of every joint where both links carry collision
/// geometry, ordered by name.
pub fn adjacent_pairs(model: &RobotModel) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = model
        .joints()
        .iter()
        .filter_map(|j| {
            let (p, c) = (model.link(&j.parent_link)?, model.link(&j.child_link)?);
            if !(p.has_collision() && c.has_collision()) {
                return None;
            }
            Some(if p.name <= c.name {
                (p.name.clone(), c.name.clone())
            } else {
                (c.name.clone(), p.name.clone())
            })
        })
        .collect();
    out.sort();
    out.dedup();
    out
}

fn run(model: &RobotModel, params: &AcmGenParams, progress: &AcmProgress) -> Result<AcmReport, AcmGenError> {
    let start = Instant::now();
    let index_pairs: Vec<(usize, usize)> = progress
        .pairs
        .iter()
        .map(|(a, b)| (model.link_index(a).unwrap(), model.link_index(b).unwrap()))
        .collect();

    let q0 = default_positions(model);
    let poses0 = link_poses(model, &q0);
    let default_hits: Vec<bool> = index_pairs
        .iter()
        .map(|&(a, b)| links_intersect(model, &poses0, a, b))
        .collect();

    let all_vars: Vec<usize> = (0..model.variable_count()).collect();
    let chunk = params.progress_granularity;
    let chunks = params.sample_count.div_ceil(chunk);
    let totals = (0..chunks)
        .into_par_iter()
        .map(|c| -> Result<Vec<u64>, AcmGenError> {
            let mut counts = vec![0u64; index_pairs.len()];
            if progress.cancelled.load(Ordering::Acquire) {
                return Err(AcmGenError::Cancelled);
            }
            let mut q = q0.clone();
            let end = ((c + 1) * chunk).min(params.sample_count);
            for i in c * chunk..end {
                let mut rng = indexed_rng(params.seed, i);
                sample_variables(model, &all_vars, &mut rng, &mut q)?;
                let poses = link_poses(model, &q);
                for (k, &(a, b)) in index_pairs.iter().enumerate() {
                    if links_intersect(model, &poses, a, b) {
                        counts[k] += 1;
                    }
                }
            }
            for (k, n) in counts.iter().enumerate() {
                progress.counts[k].fetch_add(*n, Ordering::Relaxed);
            }
            progress.done.fetch_add(end - c * chunk, Ordering::AcqRel);
            Ok(counts)
        })
        .try_reduce(
            || vec![0u64; index_pairs.len()],
            |mut acc, v| {
                for (a, b) in acc.iter_mut().zip(v) {
                    *a += b;
                }
                Ok(acc)
            },
        )?;

    let n = params.sample_count;
    let mut acm = AllowedCollisionMatrix::new();
    let mut pairs = Vec::new();
    for (a, b) in adjacent_pairs(model) {
        acm.set(
            &a,
            &b,
            AcmEntry {
                disabled: true,
                reason: AcmReason::Adjacent,
                stats: None,
            },
        )
        .expect("adjacent entry");
        pairs.push(PairReport {
            link1: a,
            link2: b,
            samples: 0,
            collisions: 0,
            default_collision: false,
            disabled: true,
            reason: Some(AcmReason::Adjacent),
        });
    }
    for (k, (a, b)) in progress.pairs.iter().enumerate() {
        let collisions = totals[k];
        let stats = PairStats { samples: n, collisions };
        // A pair seen colliding in the default state is never classified Never.
        let reason = if collisions as f64 >= params.always_threshold * n as f64 {
            Some(AcmReason::Always)
        } else if collisions == 0 && !default_hits[k] {
            Some(AcmReason::Never)
        } else {
            None
        };
        if let Some(reason) = reason {
            acm.set(
                a,
                b,
                AcmEntry {
                    disabled: true,
                    reason,
                    stats: Some(stats),
                },
            )
            .expect("sampled entry");
        }
        pairs.push(PairReport {
            link1: a.clone(),
            link2: b.clone(),
            samples: n,
            collisions,
            default_collision: default_hits[k],
            disabled: reason.is_some(),
            reason,
        });
    }
    pairs.sort_by(|x, y| (&x.link1, &x.link2).cmp(&(&y.link1, &y.link2)));

    let mut disabled_by_reason = BTreeMap::new();
    for (_, e) in acm.iter() {
        *disabled_by_reason.entry(e.reason).or_insert(0) += 1;
    }
    Ok(AcmReport {
        acm,
        pairs,
        disabled_by_reason,
        sample_count: n,
        seed: params.seed,
        always_threshold: params.always_threshold,
        note: CAVEAT.to_string(),
        elapsed_s: Some(start.elapsed().as_secs_f64()),
    })
}

/// A generation running on a background thread.
pub struct AcmJob {
    progress: Arc<AcmProgress>,
    handle: Option<JoinHandle<Result<AcmReport, AcmGenError>>>,
    result: Option<Result<AcmReport, String>>,
}

impl AcmJob {
    /// Starts a job; `threads` fixes the worker count (rayon default when `None`).
    pub fn spawn(model: Arc<RobotModel>, params: AcmGenParams, threads: Option<usize>) -> Result<AcmJob, AcmGenError> {
        let progress = Arc::new(prepare(&model, &params)?);
        let p = progress.clone();
        let handle = std::thread::spawn(move || {
            let mut builder = rayon::ThreadPoolBuilder::new();
            if let Some(t) = threads {
                builder = builder.num_threads(t);
            }
            match builder.build() {
                Ok(pool) => pool.install(|| run(&model, &params, &p)),
                Err(_) => run(&model, &params, &p),
            }
        });
        Ok(AcmJob {
            progress,
            handle: Some(handle),
            result: None,
        })
    }

    pub fn progress(&self) -> ProgressSnapshot {
        self.progress.snapshot()
    }

    pub fn cancel(&self) {
        self.progress.cancel();
    }

    pub fn is_finished(&self) -> bool {
        self.result.is_some() || self.handle.as_ref().is_some_and(|h| h.is_finished())
    }

    /// Blocks until the job ends. The outcome is kept, so repeated calls agree.
    pub fn wait(&mut self) -> Result<&AcmReport, String> {
        if let Some(h) = self.handle.take() {
            let r = match h.join() {
                Ok(r) => r.map_err(|e| e.to_string()),
                Err(_) => Err("ACM worker panicked".to_string()),
            };
            self.result = Some(r);
        }
        match self.result.as_ref().expect("joined") {
            Ok(r) => Ok(r),
            Err(e) => Err(e.clone()),
        }
    }

    /// Outcome if finished, without blocking.
    pub fn try_result(&mut self) -> Option<Result<&AcmReport, String>> {
        if self.is_finished() {
            Some(self.wait())
        } else {
            None
        }
    }
}

/// Job table allowing at most one running job at a time.
#[derive(Default)]
pub struct AcmJobs {
    next_id: u64,
    jobs: BTreeMap<u64, Arc<Mutex<AcmJob>>>,
}

impl AcmJobs {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn running(&self) -> Option<u64> {
        self.jobs
            .iter()
            .find(|(_, j)| !j.lock().expect("job lock").is_finished())
            .map(|(id, _)| *id)
    }

    pub fn start(&mut self, model: Arc<RobotModel>, params: AcmGenParams, threads: Option<usize>) -> Result<u64, AcmGenError> {
        if let Some(id) = self.running() {
            return Err(AcmGenError::JobRunning(id));
        }
        let job = AcmJob::spawn(model, params, threads)?;
        self.next_id += 1;
        self.jobs.insert(self.next_id, Arc::new(Mutex::new(job)));
        Ok(self.next_id)
    }

    pub fn get(&self, id: u64) -> Result<Arc<Mutex<AcmJob>>, AcmGenError> {
        self.jobs.get(&id).cloned().ok_or(AcmGenError::UnknownJob(id))
    }

    pub fn clear(&mut self) {
        for j in self.jobs.values() {
            j.lock().expect("job lock").cancel();
        }
        self.jobs.clear();
    }
}
