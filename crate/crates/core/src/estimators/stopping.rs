//! Shared stopping rules of the detection loop.

use super::config::EstimatorConfig;
use super::estimate::StopReason;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Continue,
    Stop(StopReason),
}

/// `nmse` holds the trajectory over accepted iterations (initial value first).
pub fn stopping_check(nmse: &[f64], consecutive_rejects: usize, n_mpcs: usize, cfg: &EstimatorConfig) -> StopDecision {
    if n_mpcs >= cfg.max_mpcs {
        return StopDecision::Stop(StopReason::MaxMpcs);
    }
    if consecutive_rejects >= cfg.consecutive_rejects_stop {
        return StopDecision::Stop(StopReason::Rejections);
    }
    if let [.., prev, last] = nmse {
        if last > prev {
            return StopDecision::Stop(StopReason::NmseIncrease);
        }
        if prev - last < cfg.nmse_tol * last {
            return StopDecision::Stop(StopReason::Tolerance);
        }
    }
    StopDecision::Continue
}
