//! The cone map as a whole: rough quasi-isometry and similarity constants over
//! pairs of cone points, the pair-splitting identity, and coboundedness.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Fitted, RoughMode, VerifyError, Witness};
use crate::cone::{rho_from_parts, ConePoint, ConeSample};
use crate::extension::ConeMapExtension;
use crate::reduce::Best;
use crate::scalar::{floor_log2, pow2, Scalar};

/// How many pairs of sample points to visit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairBudget {
    /// Visit every unordered pair when there are at most this many.
    pub exhaustive_limit: u64,
    /// Draw exactly this many pairs instead, whatever the sample size.
    pub sampled: Option<u64>,
    /// Pairs drawn when the sample is too large for an exhaustive pass.
    pub fallback: u64,
}

impl Default for PairBudget {
    fn default() -> Self {
        PairBudget {
            exhaustive_limit: 10_000_000,
            sampled: None,
            fallback: 1_000_000,
        }
    }
}

impl PairBudget {
    pub fn sampled(count: u64) -> Self {
        PairBudget {
            sampled: Some(count),
            ..PairBudget::default()
        }
    }
}

enum PairSet {
    All(usize),
    Drawn(Vec<(u32, u32)>),
}

impl PairSet {
    fn new(points: usize, budget: &PairBudget, seed: u64) -> Self {
        let total = (points as u64) * (points as u64).saturating_sub(1) / 2;
        let draws = match budget.sampled {
            Some(k) => k,
            None if total <= budget.exhaustive_limit => return PairSet::All(points),
            None => budget.fallback,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pairs = Vec::with_capacity(draws as usize);
        while (pairs.len() as u64) < draws && points > 1 {
            let (i, j) = (rng.gen_range(0..points), rng.gen_range(0..points));
            if i != j {
                pairs.push((i.min(j) as u32, i.max(j) as u32));
            }
        }
        PairSet::Drawn(pairs)
    }

    fn len(&self) -> u64 {
        match self {
            PairSet::All(n) => (*n as u64) * (*n as u64).saturating_sub(1) / 2,
            PairSet::Drawn(p) => p.len() as u64,
        }
    }

    fn exhaustive(&self) -> bool {
        matches!(self, PairSet::All(_))
    }

    /// Folds `visit(acc, i, j)` over every pair with an order-independent merge.
    fn fold<A: Send>(
        &self,
        init: impl Fn() -> A + Sync + Send,
        visit: impl Fn(&mut A, usize, usize) + Sync + Send,
        merge: impl Fn(A, A) -> A + Sync + Send,
    ) -> A {
        match self {
            PairSet::All(n) => (0..*n)
                .into_par_iter()
                .fold(&init, |mut acc, i| {
                    for j in (i + 1)..*n {
                        visit(&mut acc, i, j);
                    }
                    acc
                })
                .reduce(&init, &merge),
            PairSet::Drawn(pairs) => pairs
                .par_iter()
                .fold(&init, |mut acc, &(i, j)| {
                    visit(&mut acc, i as usize, j as usize);
                    acc
                })
                .reduce(&init, &merge),
        }
    }

    fn for_each_collect<R: Send>(&self, f: impl Fn(usize, usize) -> R + Sync + Send) -> Vec<R> {
        match self {
            PairSet::All(n) => (0..*n)
                .into_par_iter()
                .flat_map_iter(|i| ((i + 1)..*n).map(move |j| (i, j)))
                .map(|(i, j)| f(i, j))
                .collect(),
            PairSet::Drawn(pairs) => pairs
                .par_iter()
                .map(|&(i, j)| f(i as usize, j as usize))
                .collect(),
        }
    }
}

/// Range of `rho(q1, q2) - rho(q1, p1) - rho(q2, p2)` with `p_i = (x_i, t)`
/// and `t = max(d(x1, x2), t1, t2)`, over source pairs and over their images.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitIdentity<T> {
    pub source_min: T,
    pub source_max: T,
    pub image_min: T,
    pub image_max: T,
    pub pairs: u64,
}

impl<T: Scalar> SplitIdentity<T> {
    pub fn min(&self) -> T {
        self.source_min.min(self.image_min)
    }

    pub fn max(&self) -> T {
        self.source_max.max(self.image_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoremFit<T> {
    pub theta: T,
    /// Rough quasi-isometry constant at factor `theta`.
    pub qi: Fitted<T>,
    /// Rough similarity constant at factor `alpha`, when one was given.
    pub similarity: Option<Fitted<T>>,
    pub split: SplitIdentity<T>,
    /// Largest distance from a target-cone sample point to the nearest image point.
    pub cobounded_radius: Fitted<T>,
    pub pairs: u64,
    pub exhaustive: bool,
}

fn split_gap<T: Scalar>(d: T, s: T, t: T) -> T {
    let top = d.max(s).max(t);
    rho_from_parts(d, s, t)
        - (rho_from_parts(T::zero(), s, top) + rho_from_parts(T::zero(), t, top))
}

struct PairAcc<T> {
    qi: Best<T, (usize, usize)>,
    sim: Best<T, (usize, usize)>,
    split: [T; 4],
}

impl<T: Scalar> PairAcc<T> {
    fn new() -> Self {
        PairAcc {
            qi: Best::none(),
            sim: Best::none(),
            split: [
                T::infinity(),
                T::neg_infinity(),
                T::infinity(),
                T::neg_infinity(),
            ],
        }
    }

    fn merge(self, other: Self) -> Self {
        PairAcc {
            qi: self.qi.merge(other.qi),
            sim: self.sim.merge(other.sim),
            split: [
                self.split[0].min(other.split[0]),
                self.split[1].max(other.split[1]),
                self.split[2].min(other.split[2]),
                self.split[3].max(other.split[3]),
            ],
        }
    }
}

fn images<T: Scalar>(ext: &ConeMapExtension<T>, sample: &ConeSample<'_, T>) -> Vec<ConePoint<T>> {
    sample.points.par_iter().map(|&p| ext.apply(p)).collect()
}

fn check_sample<T: Scalar>(
    ext: &ConeMapExtension<T>,
    sample: &ConeSample<'_, T>,
) -> Result<(), VerifyError> {
    if sample.space != &*ext.map.source {
        return Err(VerifyError::Config(
            "cone sample is not over the source space of the map".into(),
        ));
    }
    Ok(())
}

fn cone_witness<T: Scalar>(p: ConePoint<T>, q: ConePoint<T>) -> Witness {
    Witness::Cone {
        p: (p.base, p.height.to_f64_lossy()),
        q: (q.base, q.height.to_f64_lossy()),
    }
}

/// Fits the cone map over pairs of `sample` points and measures how far the
/// target cone is from the image.
pub fn check_theorem<T: Scalar>(
    ext: &ConeMapExtension<T>,
    sample: &ConeSample<'_, T>,
    theta: T,
    alpha: Option<T>,
    budget: &PairBudget,
    seed: u64,
) -> Result<TheoremFit<T>, VerifyError> {
    check_sample(ext, sample)?;
    let f = &ext.map;
    let pts = &sample.points;
    let img = images(ext, sample);
    let pairs = PairSet::new(pts.len(), budget, seed);
    let qi_mode = RoughMode::QuasiIsometry(theta);
    let sim_mode = alpha.map(RoughMode::Similarity);

    let acc = pairs.fold(
        PairAcc::new,
        |acc, i, j| {
            let (p, q) = (pts[i], pts[j]);
            let (pi, qi) = (img[i], img[j]);
            let d = f.dz(p.base, q.base);
            let dw = f.dw(p.base, q.base);
            let rho = rho_from_parts(d, p.height, q.height);
            let rho_image = rho_from_parts(dw, pi.height, qi.height);
            acc.qi.offer(qi_mode.deviation(rho, rho_image), (i, j));
            if let Some(mode) = sim_mode {
                acc.sim.offer(mode.deviation(rho, rho_image), (i, j));
            }
            let gs = split_gap(d, p.height, q.height);
            let gi = split_gap(dw, pi.height, qi.height);
            acc.split[0] = acc.split[0].min(gs);
            acc.split[1] = acc.split[1].max(gs);
            acc.split[2] = acc.split[2].min(gi);
            acc.split[3] = acc.split[3].max(gi);
        },
        PairAcc::merge,
    );

    let count = pairs.len();
    let exhaustive = pairs.exhaustive();
    let fitted = |best: Best<T, (usize, usize)>| Fitted {
        value: best.value_or(T::zero()),
        witness: best.witness.map(|(i, j)| cone_witness(pts[i], pts[j])),
        sample_size: count,
        exhaustive,
    };
    let empty_to_zero = |v: T| if v.is_finite() { v } else { T::zero() };
    Ok(TheoremFit {
        theta,
        qi: fitted(acc.qi),
        similarity: sim_mode.map(|_| fitted(acc.sim)),
        split: SplitIdentity {
            source_min: empty_to_zero(acc.split[0]),
            source_max: empty_to_zero(acc.split[1]),
            image_min: empty_to_zero(acc.split[2]),
            image_max: empty_to_zero(acc.split[3]),
            pairs: count,
        },
        cobounded_radius: cobounded_radius(ext, &img),
        pairs: count,
        exhaustive,
    })
}

/// On every target ray, the dyadic heights between the lowest and highest
/// image height on that ray, each measured to its nearest image point.
fn cobounded_radius<T: Scalar>(ext: &ConeMapExtension<T>, img: &[ConePoint<T>]) -> Fitted<T> {
    let target = &ext.map.target;
    let n = target.n();
    let mut range = vec![(T::infinity(), T::neg_infinity()); n];
    for p in img {
        let r = &mut range[p.base];
        *r = (r.0.min(p.height), r.1.max(p.height));
    }
    let mut probes = Vec::new();
    for (base, &(lo, hi)) in range.iter().enumerate() {
        if lo > hi {
            continue;
        }
        let (klo, exact) = floor_log2(lo).expect("image heights are positive");
        let first = if exact { klo } else { klo + 1 };
        let (last, _) = floor_log2(hi).expect("image heights are positive");
        for k in first..=last {
            probes.push(ConePoint {
                base,
                height: pow2(T::from_level(k)),
            });
        }
    }
    let best = probes
        .par_iter()
        .enumerate()
        .map(|(i, &p)| {
            let mut nearest = Best::none();
            for (j, q) in img.iter().enumerate() {
                let d = rho_from_parts(target.d(p.base, q.base), p.height, q.height);
                nearest.offer(-d, j);
            }
            let j = nearest.witness.expect("image is non-empty");
            Best::of(-nearest.value, (i, j))
        })
        .reduce(Best::none, Best::merge);
    Fitted::exhaustive(
        best.value_or(T::zero()),
        best.witness.map(|(i, j)| cone_witness(probes[i], img[j])),
        probes.len() as u64,
    )
}

/// `(rho_source, rho_image)` for the same pairs `check_theorem` visits.
pub fn theorem_pairs<T: Scalar>(
    ext: &ConeMapExtension<T>,
    sample: &ConeSample<'_, T>,
    budget: &PairBudget,
    seed: u64,
) -> Result<Vec<(T, T)>, VerifyError> {
    check_sample(ext, sample)?;
    let f = &ext.map;
    let pts = &sample.points;
    let img = images(ext, sample);
    let pairs = PairSet::new(pts.len(), budget, seed);
    Ok(pairs.for_each_collect(|i, j| {
        let (p, q) = (pts[i], pts[j]);
        (
            rho_from_parts(f.dz(p.base, q.base), p.height, q.height),
            rho_from_parts(f.dw(p.base, q.base), img[i].height, img[j].height),
        )
    }))
}
