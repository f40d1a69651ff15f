//! Scalar Lloyd iterations for the adaptive codebook.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_weights, nearest_sorted, Codebook, QuantParams, QuantizeError};

/// Safety cap on Lloyd iterations; normal termination is an exact fixed point.
pub const MAX_LLOYD_ITERS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub enum KMeansInit {
    /// k-means++ seeding driven by a ChaCha8 stream seeded with `seed`.
    PlusPlus { seed: u64 },
    /// Start from an existing codebook (e.g. the previous C step's).
    Warm(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct ClusterResult {
    pub params: QuantParams,
    /// Final distortion: squared for k-means, absolute for k-medians.
    pub distortion: f64,
    /// Number of centroid updates performed.
    pub iterations: usize,
    /// Distortion after the initial assignment and after every iteration.
    pub history: Vec<f64>,
}

#[derive(Clone, Copy)]
enum Centroid {
    Mean,
    Median,
}

impl Centroid {
    fn cost(self, d: f64) -> f64 {
        match self {
            Centroid::Mean => d * d,
            Centroid::Median => d.abs(),
        }
    }
}

fn distortion(w: &[f64], centers: &[f64], kappa: &[u32], rule: Centroid) -> f64 {
    w.iter().zip(kappa).map(|(&x, &k)| rule.cost(x - centers[k as usize])).sum()
}

fn sorted_unique(mut c: Vec<f64>) -> Vec<f64> {
    c.sort_unstable_by(f64::total_cmp);
    c.dedup();
    c
}

fn plus_plus(w: &[f64], k: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = vec![w[rng.random_range(0..w.len())]];
    let mut d2: Vec<f64> = w.iter().map(|&x| (x - centers[0]).powi(2)).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            break;
        }
        let mut target = rng.random::<f64>() * total;
        let mut pick = w.len() - 1;
        for (i, &d) in d2.iter().enumerate() {
            if d > 0.0 && target < d {
                pick = i;
                break;
            }
            target -= d;
        }
        // rounding can walk off the end onto an already-covered weight
        if d2[pick] == 0.0 {
            pick = d2.iter().rposition(|&d| d > 0.0).expect("total > 0");
        }
        let c = w[pick];
        centers.push(c);
        for (d, &x) in d2.iter_mut().zip(w) {
            *d = d.min((x - c).powi(2));
        }
    }
    sorted_unique(centers)
}

/// Adds the weight farthest from the current centers until there are `k`
/// centers or every weight is covered exactly.
fn top_up(w: &[f64], mut centers: Vec<f64>, k: usize) -> Vec<f64> {
    while centers.len() < k {
        let kappa = nearest_sorted(w, &centers);
        let (far, gap) = w
            .iter()
            .zip(&kappa)
            .map(|(&x, &c)| (x, (x - centers[c as usize]).abs()))
            .fold((0.0, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if gap == 0.0 {
            break;
        }
        centers.push(far);
        centers = sorted_unique(centers);
    }
    centers
}

fn lower_median(values: &mut [f64]) -> f64 {
    let mid = (values.len() - 1) / 2;
    let (_, m, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    *m
}

/// Recomputes centers from the assignments. Returns the new centers (sorted)
/// and whether an empty cluster had to be reseeded.
fn update_centers(
    w: &[f64],
    centers: &[f64],
    kappa: &[u32],
    rule: Centroid,
) -> (Vec<f64>, bool) {
    let k = centers.len();
    let mut next: Vec<Option<f64>> = match rule {
        Centroid::Mean => {
            let mut sum = vec![0.0; k];
            let mut count = vec![0usize; k];
            for (&x, &c) in w.iter().zip(kappa) {
                sum[c as usize] += x;
                count[c as usize] += 1;
            }
            sum.iter().zip(&count).map(|(&s, &n)| (n > 0).then(|| s / n as f64)).collect()
        }
        Centroid::Median => {
            let mut members: Vec<Vec<f64>> = vec![Vec::new(); k];
            for (&x, &c) in w.iter().zip(kappa) {
                members[c as usize].push(x);
            }
            members
                .iter_mut()
                .map(|m| (!m.is_empty()).then(|| lower_median(m)))
                .collect()
        }
    };

    let empty: Vec<usize> = (0..k).filter(|&c| next[c].is_none()).collect();
    let reseeded = !empty.is_empty();
    if reseeded {
        // distance of every weight to its (updated) own center; a reseeded
        // weight drops to zero so the next empty cluster takes another one
        let mut gap: Vec<f64> = w
            .iter()
            .zip(kappa)
            .map(|(&x, &c)| next[c as usize].map_or(0.0, |m| (x - m).abs()))
            .collect();
        for c in empty {
            let (i, &g) = gap
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .expect("nonempty input");
            if g > 0.0 {
                next[c] = Some(w[i]);
                gap[i] = 0.0;
            }
        }
    }
    (sorted_unique(next.into_iter().flatten().collect()), reseeded)
}

fn lloyd(
    w: &[f64],
    k: usize,
    init: &KMeansInit,
    rule: Centroid,
) -> Result<ClusterResult, QuantizeError> {
    check_weights(w)?;
    if k == 0 {
        return Err(QuantizeError::ZeroClusters);
    }
    let mut centers = match init {
        KMeansInit::PlusPlus { seed } => plus_plus(w, k, *seed),
        KMeansInit::Warm(c) => {
            let c = sorted_unique(c.iter().copied().filter(|x| x.is_finite()).collect());
            let mut c = if c.is_empty() { vec![w[0]] } else { c };
            c.truncate(k);
            top_up(w, c, k)
        }
    };

    let mut kappa = nearest_sorted(w, &centers);
    let mut history = vec![distortion(w, &centers, &kappa, rule)];
    let mut iterations = 0;
    while iterations < MAX_LLOYD_ITERS {
        let (next, reseeded) = update_centers(w, &centers, &kappa, rule);
        centers = next;
        iterations += 1;
        let next_kappa = nearest_sorted(w, &centers);
        history.push(distortion(w, &centers, &next_kappa, rule));
        let settled = !reseeded && next_kappa == kappa;
        kappa = next_kappa;
        if settled {
            break;
        }
    }

    let distortion = *history.last().expect("history is never empty");
    let codebook = Codebook::adaptive(centers)?;
    Ok(ClusterResult {
        params: QuantParams::from_parts(codebook, kappa, false),
        distortion,
        iterations,
        history,
    })
}

/// Scalar k-means: assignment by binary search over sorted centroids,
/// centroid step by mean, run to an exact fixed point (capped at
/// [`MAX_LLOYD_ITERS`]).
///
/// When `w` has fewer than `k` distinct values the codebook comes back
/// shorter than `k`; empty clusters are reseeded at the weight farthest from
/// its centroid.
pub fn kmeans_1d(w: &[f64], k: usize, init: KMeansInit) -> Result<ClusterResult, QuantizeError> {
    lloyd(w, k, &init, Centroid::Mean)
}

/// `l1` variant: same assignment step, centroid step by the lower median.
pub fn kmedians_1d(
    w: &[f64],
    k: usize,
    init: KMeansInit,
) -> Result<ClusterResult, QuantizeError> {
    lloyd(w, k, &init, Centroid::Median)
}
