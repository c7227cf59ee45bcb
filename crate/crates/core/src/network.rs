//! Participation and winner networks between workers and tasks.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::model::{EventLog, WorkerFeatures};

/// The two bipartite worker-task networks of a market.
///
/// `winner_edges` is a subset of `participation_edges` and holds at most one
/// edge per task.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MarketNetworks {
    participation_edges: BTreeSet<(String, String)>,
    winner_edges: BTreeSet<(String, String)>,
}

impl MarketNetworks {
    /// `(worker_id, task_id)` pairs.
    pub fn participation_edges(&self) -> &BTreeSet<(String, String)> {
        &self.participation_edges
    }

    pub fn winner_edges(&self) -> &BTreeSet<(String, String)> {
        &self.winner_edges
    }
}

pub fn build_networks(log: &EventLog) -> MarketNetworks {
    let mut nets = MarketNetworks::default();
    for ev in log.events() {
        let edge = (String::from(ev.worker_id()), String::from(ev.task_id()));
        if ev.is_winner() {
            nets.winner_edges.insert(edge.clone());
        }
        nets.participation_edges.insert(edge);
    }
    nets
}

/// Degree features for every worker with at least one participation edge,
/// sorted by worker id.
pub fn worker_features(nets: &MarketNetworks) -> Vec<WorkerFeatures> {
    let mut degrees: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
    for (worker, _) in &nets.participation_edges {
        degrees.entry(worker).or_default().0 += 1;
    }
    for (worker, _) in &nets.winner_edges {
        degrees.entry(worker).or_default().1 += 1;
    }
    degrees
        .into_iter()
        .map(|(worker, (p, w))| {
            WorkerFeatures::new(worker, p, w).expect("winner edges are participation edges")
        })
        .collect()
}

/// Shorthand for `worker_features(&build_networks(log))`.
pub fn features_from_log(log: &EventLog) -> Vec<WorkerFeatures> {
    worker_features(&build_networks(log))
}
