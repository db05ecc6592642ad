use serde::{Deserialize, Serialize};

/// One `(α, β)` pair: `α = (α_0, …, α_h)`, `β = (β_1, …, β_h)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub alpha: Vec<usize>,
    pub beta: Vec<usize>,
}

impl Partition {
    pub fn h(&self) -> usize {
        self.beta.len()
    }

    pub fn beta_total(&self) -> usize {
        self.beta.iter().sum()
    }
}

/// All `(α, β)` with `α_0, α_h ≥ 0`, interior `α_k ≥ 1`, `β_k ≥ 1` and
/// `Σα + Σβ = γ + 1`, in lexicographic order of `(β, α)`. Empty when
/// `h = 0` or `h > ⌊γ/2⌋ + 1`.
pub fn enumerate_partitions(gamma: usize, h: usize) -> Vec<Partition> {
    let mut out = Vec::new();
    if h == 0 || h > gamma / 2 + 1 {
        return out;
    }
    let total = gamma + 1;
    let mut beta = Vec::with_capacity(h);
    compositions(h, h, total - (h - 1), &mut beta, &mut |beta| {
        let rest = total - beta.iter().sum::<usize>();
        if rest < h - 1 {
            return;
        }
        // Shift interior α_k down by one so every part is ≥ 0.
        let mut alpha = Vec::with_capacity(h + 1);
        weak_compositions(h + 1, rest - (h - 1), &mut alpha, &mut |a| {
            let alpha = a
                .iter()
                .enumerate()
                .map(|(k, &x)| if k == 0 || k == h { x } else { x + 1 })
                .collect();
            out.push(Partition { alpha, beta: beta.to_vec() });
        });
    });
    out
}

/// Sequences of `parts` positive integers with sum at most `max_sum`, with
/// each emitted once `parts` entries are chosen.
fn compositions(parts: usize, left: usize, max_sum: usize, cur: &mut Vec<usize>, emit: &mut dyn FnMut(&[usize])) {
    if left == 0 {
        emit(cur);
        return;
    }
    let used: usize = cur.iter().sum();
    // Leave at least one for each remaining part.
    let cap = max_sum.saturating_sub(used + left - 1);
    for x in 1..=cap {
        cur.push(x);
        compositions(parts, left - 1, max_sum, cur, emit);
        cur.pop();
    }
}

/// Sequences of `parts` nonnegative integers summing to exactly `sum`.
fn weak_compositions(parts: usize, sum: usize, cur: &mut Vec<usize>, emit: &mut dyn FnMut(&[usize])) {
    if cur.len() + 1 == parts {
        let used: usize = cur.iter().sum();
        cur.push(sum - used);
        emit(cur);
        cur.pop();
        return;
    }
    let used: usize = cur.iter().sum();
    for x in 0..=sum - used {
        cur.push(x);
        weak_compositions(parts, sum, cur, emit);
        cur.pop();
    }
}

fn binom(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// `Σ_β binom(β−1, h−1)·binom(γ+2−β, h)` over `β = h, …, γ+1`.
pub fn partition_count(gamma: usize, h: usize) -> u128 {
    if h == 0 || h > gamma / 2 + 1 {
        return 0;
    }
    (h..=gamma + 1).map(|b| binom(b - 1, h - 1) * binom(gamma + 2 - b, h)).sum()
}
