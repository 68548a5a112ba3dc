//! Deterministic stochastic mock fuzzer backend.
//!
//! Runs entirely on a virtual clock: the coverage frontier starts at the
//! seed corpus's edge union, uncovered-but-discoverable edges race as
//! independent exponential clocks, and each bug triggers after an
//! exponential delay once its reach edge is covered. Identical arguments
//! produce identical results.

use std::collections::BTreeSet;

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::Exp;

use crate::corpus::{Corpus, CorpusInput, CoverageSignature, InputOrigin};

use super::model::MockModel;
use super::{apply_sanitizer_slowdown, BackendRun};

struct BugState {
    reached_at: Option<f64>,
    trigger_at: Option<f64>,
    fired: bool,
}

/// Simulate one backend fuzzing one mock target for `duration` virtual
/// seconds.
pub fn mock_fuzz(
    model: &MockModel,
    duration: f64,
    seed_corpus: &Corpus,
    rng_seed: u64,
    sanitizers_enabled: bool,
    backend_name: &str,
) -> BackendRun {
    let mut rng = ChaCha12Rng::seed_from_u64(rng_seed);
    let slow = |rate: f64| {
        apply_sanitizer_slowdown(rate, sanitizers_enabled, model.slowdown_factor)
            .expect("model validated factor >= 1")
    };

    let mut covered: BTreeSet<u32> = seed_corpus
        .edge_union()
        .into_iter()
        .filter(|e| *e < model.n_edges)
        .collect();

    let mut run = BackendRun::new(backend_name);
    let mut bugs: Vec<BugState> = model
        .bugs
        .iter()
        .map(|_| BugState {
            reached_at: None,
            trigger_at: None,
            fired: false,
        })
        .collect();

    let reach = |idx: usize,
                     t: f64,
                     bugs: &mut Vec<BugState>,
                     rng: &mut ChaCha12Rng,
                     run: &mut BackendRun| {
        let bug = &model.bugs[idx];
        let state = &mut bugs[idx];
        if state.reached_at.is_some() {
            return;
        }
        state.reached_at = Some(t);
        run.reached.insert(bug.bug_id.clone());
        run.event_times
            .entry(bug.bug_id.clone())
            .or_default()
            .reached = Some(t);
        let rate = slow(bug.trigger_rate);
        if rate > 0.0 {
            let delay = Exp::new(rate).unwrap().sample(rng);
            state.trigger_at = Some(t + delay);
        }
    };

    // Bugs already reachable from the seed corpus are reached at t = 0.
    for idx in 0..model.bugs.len() {
        if covered.contains(&model.bugs[idx].reach_edge) {
            reach(idx, 0.0, &mut bugs, &mut rng, &mut run);
        }
    }

    let mut now = 0.0f64;
    loop {
        // Active frontier: uncovered edges whose parent is covered.
        let active: Vec<(u32, f64)> = (0..model.n_edges)
            .filter(|e| !covered.contains(e) && model.discoverable(*e, &covered))
            .map(|e| (e, slow(model.edge_rate(e))))
            .filter(|(_, r)| *r > 0.0)
            .collect();
        let total_rate: f64 = active.iter().map(|(_, r)| r).sum();

        let next_discovery = if total_rate > 0.0 {
            now + Exp::new(total_rate).unwrap().sample(&mut rng)
        } else {
            f64::INFINITY
        };
        let next_trigger = bugs
            .iter()
            .enumerate()
            .filter(|(_, s)| !s.fired)
            .filter_map(|(i, s)| s.trigger_at.map(|t| (t, i)))
            .min_by(|a, b| a.partial_cmp(b).unwrap());

        let (event_time, trigger_idx) = match next_trigger {
            Some((tt, i)) if tt <= next_discovery => (tt, Some(i)),
            _ => (next_discovery, None),
        };
        if !event_time.is_finite() || event_time > duration {
            break;
        }
        now = event_time;

        match trigger_idx {
            Some(idx) => {
                let bug = &model.bugs[idx];
                bugs[idx].fired = true;
                run.triggered.insert(bug.bug_id.clone());
                let times = run
                    .event_times
                    .entry(bug.bug_id.clone())
                    .or_default();
                times.triggered = Some(now);
                let detectable = sanitizers_enabled || !bug.sanitizer_required;
                if detectable && rng.gen_bool(bug.detect_given_trigger) {
                    run.detected.insert(bug.bug_id.clone());
                    times.detected = Some(now);
                }
            }
            None => {
                // Weighted pick proportional to per-edge rate.
                let mut pick = rng.gen_range(0.0..total_rate);
                let mut chosen = active[active.len() - 1].0;
                for (e, r) in &active {
                    if pick < *r {
                        chosen = *e;
                        break;
                    }
                    pick -= r;
                }
                covered.insert(chosen);
                run.new_inputs.push(CorpusInput::new(
                    MockModel::input_bytes_for_edge(chosen),
                    CoverageSignature {
                        edges: model.path_to(chosen),
                    },
                    InputOrigin::Fuzzer(backend_name.to_string()),
                    now,
                ));
                for idx in 0..model.bugs.len() {
                    if model.bugs[idx].reach_edge == chosen {
                        reach(idx, now, &mut bugs, &mut rng, &mut run);
                    }
                }
            }
        }
    }

    run.cpu_seconds = duration;
    run
}
