use super::{cost, run_strategy, StrategySpec, WsspInstance};
use crate::error::{Error, Result};

pub const MAX_ENUMERATED_CANDIDATES: usize = 7;

/// Calls `f` on every permutation of `items` (Heap's algorithm).
pub fn for_each_permutation<T: Clone, F: FnMut(&[T])>(items: &[T], mut f: F) {
    let mut a = items.to_vec();
    let n = a.len();
    let mut c = vec![0usize; n];
    f(&a);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(c[i], i);
            }
            f(&a);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

/// Expected cost of `spec` over all `n!` equally likely arrival orders of
/// the candidates of `inst`.
pub fn exact_expected_cost(inst: &WsspInstance, spec: &StrategySpec) -> Result<f64> {
    inst.validate()?;
    let n = inst.n();
    if n > MAX_ENUMERATED_CANDIDATES {
        return Err(Error::Capacity(format!(
            "enumeration supports at most {MAX_ENUMERATED_CANDIDATES} candidates, got {n}"
        )));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    let mut failure = None;
    let mut perm = inst.clone();
    for_each_permutation(&inst.candidates, |order| {
        if failure.is_some() {
            return;
        }
        perm.candidates.copy_from_slice(order);
        match run_strategy(&perm, spec) {
            Ok(trace) => {
                total += cost(&perm, &trace);
                count += 1;
            }
            Err(e) => failure = Some(e),
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(total / count as f64)
}
