//! Feature-subset enumeration in (size, lexicographic) order, with seeded
//! uniform sampling when the search space exceeds a budget.

use std::collections::BTreeSet;

use rand::Rng;

use crate::rng::rng_for;
use crate::{Error, Result};

/// Which subsets a node searches.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SubsetPolicy {
    pub min_size: usize,
    pub max_size: usize,
    /// Maximum number of subsets per node; 0 means all.
    pub budget: usize,
}

/// A subset with its rank in the full enumeration order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RankedSubset {
    pub rank: u128,
    pub features: Vec<usize>,
}

pub(crate) fn binomial(n: usize, k: usize) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// Number of subsets with size in `[min, max]`.
pub fn subset_count(n_features: usize, policy: &SubsetPolicy) -> Result<u128> {
    let (lo, hi) = bounds(n_features, policy)?;
    (lo..=hi).try_fold(0u128, |acc, s| {
        binomial(n_features, s)
            .and_then(|c| acc.checked_add(c))
            .ok_or_else(|| Error::invalid("feature-subset space overflows"))
    })
}

fn bounds(n_features: usize, policy: &SubsetPolicy) -> Result<(usize, usize)> {
    if n_features == 0 {
        return Err(Error::invalid("no features to enumerate"));
    }
    let lo = policy.min_size.max(1);
    let hi = policy.max_size.min(n_features);
    if lo > hi {
        return Err(Error::invalid(format!(
            "empty subset size range {}..={} for {n_features} features",
            policy.min_size, policy.max_size
        )));
    }
    Ok((lo, hi))
}

/// The `rank`-th size-`size` combination of `0..n` in lexicographic order.
fn unrank_combination(n: usize, size: usize, mut rank: u128) -> Vec<usize> {
    let mut out = Vec::with_capacity(size);
    let mut next = 0;
    for pos in 0..size {
        let remaining = size - pos - 1;
        let mut c = next;
        loop {
            let block = binomial(n - c - 1, remaining).expect("bounded by the total count");
            if rank < block {
                break;
            }
            rank -= block;
            c += 1;
        }
        out.push(c);
        next = c + 1;
    }
    out
}

fn unrank(n_features: usize, lo: usize, hi: usize, mut rank: u128) -> Vec<usize> {
    for size in lo..=hi {
        let c = binomial(n_features, size).expect("checked by subset_count");
        if rank < c {
            return unrank_combination(n_features, size, rank);
        }
        rank -= c;
    }
    unreachable!("rank exceeds subset count")
}

/// All subsets allowed by `policy`, or a seeded sample of `budget` of them
/// that always contains the all-features subset when it is in range. Output
/// is in enumeration order.
pub fn enumerate_ranked(n_features: usize, policy: &SubsetPolicy, seed: u64) -> Result<Vec<RankedSubset>> {
    let (lo, hi) = bounds(n_features, policy)?;
    let total = subset_count(n_features, policy)?;
    let ranks: Vec<u128> = if policy.budget == 0 || total <= policy.budget as u128 {
        if total > (1u128 << 24) {
            return Err(Error::invalid(format!(
                "{total} feature subsets is too many to search exhaustively; set a subset budget"
            )));
        }
        (0..total).collect()
    } else {
        let includes_full = hi == n_features;
        // the full subset is the last rank when present
        let pool = if includes_full { total - 1 } else { total };
        let want = policy.budget as u128 - u128::from(includes_full);
        let mut rng = rng_for(seed, &[0x7375_6273_6574]);
        let mut picked = BTreeSet::new();
        // Floyd's sampling without replacement
        for j in (pool - want)..pool {
            let t = rng.gen_range(0..=j);
            if !picked.insert(t) {
                picked.insert(j);
            }
        }
        if includes_full {
            picked.insert(total - 1);
        }
        picked.into_iter().collect()
    };
    Ok(ranks
        .into_iter()
        .map(|rank| RankedSubset { rank, features: unrank(n_features, lo, hi, rank) })
        .collect())
}

pub fn enumerate_feature_subsets(n_features: usize, policy: &SubsetPolicy, seed: u64) -> Result<Vec<Vec<usize>>> {
    Ok(enumerate_ranked(n_features, policy, seed)?.into_iter().map(|s| s.features).collect())
}
