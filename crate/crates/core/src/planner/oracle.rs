//! Exhaustive search over restoration decisions, for checking the greedy
//! planner on small instances.

use super::engine::Engine;
use super::{PlanError, PlannerConfig, RestorationPlan, ScoreWeights};

/// Largest load count the exhaustive search accepts.
pub const ORACLE_MAX_LOADS: usize = 8;

/// Best total compound score over every sequence of pick-ups and unit
/// starts, each step validated exactly as in the greedy planner.
///
/// At any point the search may pick up any remaining load that passes the
/// capacity and power-flow checks, or crank the next unit. Branches whose
/// score cannot beat the incumbent even if every remaining load were served
/// are cut. Ties keep the first sequence found, exploring loads in id order
/// before unit starts.
pub fn oracle_best_sequence(
    grid: &crate::grid::Grid,
    weights: ScoreWeights,
    config: &PlannerConfig,
    max_loads: usize,
) -> Result<RestorationPlan, PlanError> {
    let loads = grid.loads().count();
    let limit = max_loads.min(ORACLE_MAX_LOADS);
    if loads > limit {
        return Err(PlanError::TooLarge { loads, max: limit });
    }
    let mut root = Engine::new(grid, weights, config)?;
    root.black_start()?;
    let mut best: Option<Engine> = None;
    search(root, &mut best);
    Ok(best.expect("root is a candidate").into_plan())
}

fn search<'a>(node: Engine<'a>, best: &mut Option<Engine<'a>>) {
    let remaining = node.remaining_loads();
    let ceiling = node.total_score + remaining.iter().map(|l| node.scores[l]).sum::<f64>();
    if let Some(b) = best.as_ref() {
        if ceiling <= b.total_score {
            return;
        }
    }
    if best.as_ref().is_none_or(|b| node.total_score > b.total_score) {
        *best = Some(node.clone());
    }
    for load in remaining {
        let mut child = node.clone();
        if child.try_pickup(load).is_ok() {
            search(child, best);
        }
    }
    let mut child = node;
    if child.start_unit().is_ok() {
        search(child, best);
    }
}
