use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::slices::release_slice;
use crate::market::{EntryExitSettings, MarketState, MvnoId};
use crate::metrics::MvnoMetrics;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EntryExit {
    pub entered: Vec<MvnoId>,
    pub exited: Vec<MvnoId>,
}

/// Mean incumbent margin over the last `window` epochs, `current` included.
/// `None` until enough epochs with active incumbents exist.
fn mean_incumbent_margin(
    state: &MarketState,
    current: &BTreeMap<MvnoId, MvnoMetrics>,
    window: usize,
) -> Option<f64> {
    let epoch_margin = |mvnos: &BTreeMap<MvnoId, MvnoMetrics>| -> Option<f64> {
        let active: Vec<f64> = mvnos
            .values()
            .filter(|m| m.active)
            .map(MvnoMetrics::margin)
            .collect();
        (!active.is_empty()).then(|| active.iter().sum::<f64>() / active.len() as f64)
    };
    let mut margins = vec![epoch_margin(current)?];
    for past in state.history.iter().rev().take(window.saturating_sub(1)) {
        margins.push(epoch_margin(&past.mvnos)?);
    }
    (margins.len() == window).then(|| margins.iter().sum::<f64>() / window as f64)
}

/// Updates loss streaks from `current` results, retires MVNOs with too many
/// consecutive losses (never the last active one) and admits at most one
/// template when incumbents have been profitable enough.
///
/// Subscribers of retired MVNOs must be moved by the caller.
pub fn mvno_entry_exit(
    state: &mut MarketState,
    thresholds: &EntryExitSettings,
    current: &BTreeMap<MvnoId, MvnoMetrics>,
) -> EntryExit {
    let mut out = EntryExit::default();
    for m in state.mvnos.iter_mut().filter(|m| m.active) {
        match current.get(&m.id) {
            Some(x) if x.profit < 0.0 => m.loss_streak += 1,
            _ => m.loss_streak = 0,
        }
    }
    if !thresholds.enabled {
        return out;
    }
    let margin = mean_incumbent_margin(state, current, thresholds.margin_window);

    for i in 0..state.mvnos.len() {
        let m = &state.mvnos[i];
        let others = state.mvnos.iter().filter(|x| x.active).count() - usize::from(m.active);
        if m.active && m.loss_streak >= thresholds.exit_loss_epochs && others > 0 {
            let host = m.host.clone();
            let (mvnos, operators) = (&mut state.mvnos, &mut state.operators);
            let mvno = &mut mvnos[i];
            if let Some(op) = operators.iter_mut().find(|o| o.id == host) {
                release_slice(mvno, op);
            }
            mvno.active = false;
            mvno.loss_streak = 0;
            out.exited.push(mvno.id.clone());
        }
    }

    if margin.is_some_and(|x| x > thresholds.entry_threshold) {
        if let Some(m) = state
            .mvnos
            .iter_mut()
            .find(|m| !m.active && !out.exited.contains(&m.id))
        {
            m.active = true;
            m.loss_streak = 0;
            out.entered.push(m.id.clone());
        }
    }
    for id in &out.entered {
        log::debug!("epoch {}: {id} enters", state.epoch);
    }
    for id in &out.exited {
        log::debug!("epoch {}: {id} exits", state.epoch);
    }
    out
}
