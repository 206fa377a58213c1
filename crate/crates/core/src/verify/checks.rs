//! Per-point and per-pair checks on the level maps and ray maps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Fitted, VerifyError, Witness};
use crate::cone::rho_from_parts;
use crate::extension::{annulus_index, ray_height, ConeMapExtension};
use crate::reduce::Best;
use crate::scalar::{log2_recip, pow2, Scalar};

type Key = (usize, usize, u64, u64);

fn key_bits<T: Scalar>(v: T) -> u64 {
    v.to_f64_lossy().to_bits()
}

fn finish<T: Scalar>(
    best: Best<T, Key>,
    sample_size: u64,
    witness: impl Fn(Key) -> Witness,
) -> Fitted<T> {
    Fitted::exhaustive(
        best.value_or(T::zero()),
        best.witness.map(witness),
        sample_size,
    )
}

fn level<T: Scalar>(d: T) -> i32 {
    annulus_index(d).expect("positive distance")
}

/// Largest gap between `phi_x(l)` and the target level of `f(y)` over every
/// `y` in the annulus of level `l` around `x`.
pub fn check_annulus_gap<T: Scalar>(ext: &ConeMapExtension<T>) -> Fitted<T> {
    let f = &ext.map;
    let n = f.n();
    let best = (0..n)
        .into_par_iter()
        .map(|x| {
            let spec = &ext.spectra[x];
            let mut best = Best::none();
            for y in (0..n).filter(|&y| y != x) {
                let l = level(f.dz(y, x));
                let phi = spec.phi(l).expect("occupied level");
                let gap = (phi - level(f.dw(y, x))).abs();
                best.offer(T::from_level(gap), (x, y, l as i64 as u64, 0));
            }
            best
        })
        .reduce(Best::none, Best::merge);
    finish(best, (n * (n - 1)) as u64, |(x, y, _, _)| Witness::Points {
        x,
        y,
    })
}

/// Rough quasi-isometry constants of `phi_x` on spectrum levels and of
/// `Phi_x` on random real pairs, both at factor `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiPairBounds<T> {
    pub levels: Fitted<T>,
    pub reals: Fitted<T>,
}

#[inline]
fn qi_deviation<T: Scalar>(theta: T, d: T, image: T) -> T {
    (d / theta - image).max(image - theta * d)
}

pub fn check_phi_pair_bounds<T: Scalar>(
    ext: &ConeMapExtension<T>,
    theta: T,
    real_samples_per_point: usize,
    seed: u64,
) -> PhiPairBounds<T> {
    let n = ext.n();
    let margin = T::lit(5.0);
    let (levels, reals) = (0..n)
        .into_par_iter()
        .map(|x| {
            let spec = &ext.spectra[x];
            let mut lv = Best::none();
            for i in 0..spec.levels.len() {
                for j in (i + 1)..spec.levels.len() {
                    let dl = T::from_level(spec.levels[j] - spec.levels[i]);
                    let dphi = T::from_level(spec.phi[j] - spec.phi[i]);
                    lv.offer(qi_deviation(theta, dl, dphi), (x, i, j as u64, 0));
                }
            }

            let phi = &ext.per_point[x];
            let lo = T::from_level(spec.min_level()) - margin;
            let hi = T::from_level(spec.max_level()) + margin;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(x as u64);
            let mut re = Best::none();
            for _ in 0..real_samples_per_point {
                let t1 = lo + (hi - lo) * T::lit(rng.gen::<f64>());
                let t2 = lo + (hi - lo) * T::lit(rng.gen::<f64>());
                let d = (t1 - t2).abs();
                let image = (phi.eval(t1) - phi.eval(t2)).abs();
                re.offer(
                    qi_deviation(theta, d, image),
                    (x, 0, key_bits(t1), key_bits(t2)),
                );
            }
            (lv, re)
        })
        .reduce(
            || (Best::none(), Best::none()),
            |a, b| (a.0.merge(b.0), a.1.merge(b.1)),
        );

    let level_pairs: u64 = ext
        .spectra
        .iter()
        .map(|s| (s.levels.len() * s.levels.len().saturating_sub(1) / 2) as u64)
        .sum();
    PhiPairBounds {
        levels: finish(levels, level_pairs, |(x, i, j, _)| Witness::Levels {
            x,
            l1: ext.spectra[x].levels[i],
            l2: ext.spectra[x].levels[j as usize],
        }),
        reals: Fitted {
            exhaustive: false,
            ..finish(
                reals,
                (n * real_samples_per_point) as u64,
                |(x, _, a, b)| Witness::Reals {
                    x,
                    t1: f64::from_bits(a),
                    t2: f64::from_bits(b),
                },
            )
        },
    }
}

/// Two-point comparisons between level maps of different base points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPointBounds<T> {
    /// `|log2(1/d_W(x', y')) - Phi_x(log2(1/d_Z(x, y)))|` over ordered pairs.
    pub log_similarity: Fitted<T>,
    /// `|Phi_x(s) - Phi_y(s)|` at `s = log2(1/d_Z(x, y))`.
    pub basepoint_gap: Fitted<T>,
    /// `|Phi_x(l) - Phi_y(l)|` over levels `l` of either spectrum with `l < s`.
    pub basepoint_levels: Fitted<T>,
    /// `sup |Phi_x(u) - Phi_y(u)|` over all `u <= s`, i.e. all heights `t >= d_Z(x, y)`.
    pub basepoint_heights: Fitted<T>,
}

pub fn check_two_point_bounds<T: Scalar>(ext: &ConeMapExtension<T>) -> TwoPointBounds<T> {
    let f = &ext.map;
    let n = f.n();
    let (log_sim, gap, levels, heights) = (0..n)
        .into_par_iter()
        .map(|x| {
            let mut log_sim = Best::none();
            let mut gap = Best::none();
            let mut levels = Best::none();
            let mut heights = Best::none();
            for y in (0..n).filter(|&y| y != x) {
                let s = log2_recip(f.dz(x, y));
                let phi_x = ext.phi(x, s);
                log_sim.offer((log2_recip(f.dw(x, y)) - phi_x).abs(), (x, y, 0, 0));
                if y < x {
                    continue;
                }
                let at_s = (phi_x - ext.phi(y, s)).abs();
                gap.offer(at_s, (x, y, 0, 0));
                heights.offer(at_s, (x, y, key_bits(s), 0));
                // The difference is affine between consecutive levels of either
                // spectrum and constant below both, so levels below s plus s
                // itself cover the supremum.
                for &l in ext.spectra[x].levels.iter().chain(&ext.spectra[y].levels) {
                    let u = T::from_level(l);
                    if u < s {
                        let d = (ext.phi(x, u) - ext.phi(y, u)).abs();
                        levels.offer(d, (x, y, key_bits(u), 0));
                        heights.offer(d, (x, y, key_bits(u), 0));
                    }
                }
            }
            (log_sim, gap, levels, heights)
        })
        .reduce(
            || (Best::none(), Best::none(), Best::none(), Best::none()),
            |a, b| {
                (
                    a.0.merge(b.0),
                    a.1.merge(b.1),
                    a.2.merge(b.2),
                    a.3.merge(b.3),
                )
            },
        );

    let ordered = (n * (n - 1)) as u64;
    let unordered = ordered / 2;
    let level_evals: u64 = (0..n)
        .flat_map(|x| ((x + 1)..n).map(move |y| (x, y)))
        .map(|(x, y)| {
            let s = log2_recip(f.dz(x, y));
            ext.spectra[x]
                .levels
                .iter()
                .chain(&ext.spectra[y].levels)
                .filter(|&&l| T::from_level(l) < s)
                .count() as u64
        })
        .sum();
    let at = |(x, y, s, _): Key| Witness::PointsAt {
        x,
        y,
        s: f64::from_bits(s),
    };
    TwoPointBounds {
        log_similarity: finish(log_sim, ordered, |(x, y, _, _)| Witness::Points { x, y }),
        basepoint_gap: finish(gap, unordered, |(x, y, _, _)| Witness::Points { x, y }),
        basepoint_levels: finish(levels, level_evals, at),
        basepoint_heights: finish(heights, unordered + level_evals, at),
    }
}

/// Constants of the ray maps over a height grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayChecks<T> {
    /// Rough quasi-isometry constant of each ray map at factor `theta`.
    pub rough_qi: Fitted<T>,
    /// `max(t'/d_W, d_W/t')` at `t = d_Z(x, y)`.
    pub height_ratio: Fitted<T>,
    /// Number of height pairs checked for monotonicity (violations are errors).
    pub monotone_checked: u64,
    /// `rho_h(f_x(x, t), f_y(y, t))` over `t >= d_Z(x, y)`.
    pub pair_distance: Fitted<T>,
}

pub fn check_ray_properties<T: Scalar>(
    ext: &ConeMapExtension<T>,
    heights: &[T],
    theta: T,
) -> Result<RayChecks<T>, VerifyError> {
    let f = &ext.map;
    let n = f.n();
    let mut grid = heights.to_vec();
    grid.sort_by(|a, b| a.partial_cmp(b).expect("finite heights"));
    grid.dedup();

    type PerPoint<T> = (Best<T, Key>, Best<T, Key>, u64);
    let per_point: Vec<PerPoint<T>> = (0..n)
        .into_par_iter()
        .map(|x| {
            let phi = &ext.per_point[x];
            let images: Vec<T> = grid.iter().map(|&t| ray_height(phi, t)).collect();
            let mut qi = Best::none();
            for i in 0..grid.len() {
                for j in (i + 1)..grid.len() {
                    let d = rho_from_parts(T::zero(), grid[i], grid[j]);
                    let image = rho_from_parts(T::zero(), images[i], images[j]);
                    qi.offer(
                        qi_deviation(theta, d, image),
                        (x, 0, key_bits(grid[i]), key_bits(grid[j])),
                    );
                }
            }

            let mut ratio = Best::none();
            for y in (0..n).filter(|&y| y != x) {
                let t_image = ray_height(phi, f.dz(x, y));
                let dw = f.dw(x, y);
                ratio.offer((t_image / dw).max(dw / t_image), (x, y, 0, 0));
            }

            // Monotonicity over the grid, every source distance and every breakpoint height.
            let mut probe: Vec<T> = grid.clone();
            probe.extend((0..n).filter(|&y| y != x).map(|y| f.dz(x, y)));
            probe.extend(phi.breakpoints().iter().map(|&(l, _)| pow2(-l)));
            probe.sort_by(|a, b| a.partial_cmp(b).expect("finite heights"));
            probe.dedup();
            let mut violation = None;
            let mut prev: Option<(T, T)> = None;
            for &t in &probe {
                let image = ray_height(phi, t);
                if let Some((pt, pimage)) = prev {
                    if image < pimage && violation.is_none() {
                        violation = Some((pt, t));
                    }
                }
                prev = Some((t, image));
            }
            match violation {
                Some((t1, t2)) => Err(VerifyError::MonotonicityViolation {
                    base: x,
                    t1: t1.to_f64_lossy(),
                    t2: t2.to_f64_lossy(),
                }),
                None => Ok((qi, ratio, probe.len().saturating_sub(1) as u64)),
            }
        })
        .collect::<Result<Vec<_>, VerifyError>>()?;

    let mut qi = Best::none();
    let mut ratio = Best::none();
    let mut monotone_checked = 0;
    for (a, b, c) in per_point {
        qi = qi.merge(a);
        ratio = ratio.merge(b);
        monotone_checked += c;
    }

    let pair_distance = (0..n)
        .into_par_iter()
        .map(|x| {
            let mut best = Best::none();
            for y in (x + 1)..n {
                let d = f.dz(x, y);
                let dw = f.dw(x, y);
                for t in std::iter::once(d).chain(grid.iter().copied().filter(|&t| t >= d)) {
                    let tx = ray_height(&ext.per_point[x], t);
                    let ty = ray_height(&ext.per_point[y], t);
                    best.offer(rho_from_parts(dw, tx, ty), (x, y, key_bits(t), 0));
                }
            }
            best
        })
        .reduce(Best::none, Best::merge);
    let pair_evals: u64 = (0..n)
        .flat_map(|x| ((x + 1)..n).map(move |y| (x, y)))
        .map(|(x, y)| 1 + grid.iter().filter(|&&t| t >= f.dz(x, y)).count() as u64)
        .sum();

    let h = grid.len() as u64;
    Ok(RayChecks {
        rough_qi: finish(
            qi,
            n as u64 * h * h.saturating_sub(1) / 2,
            |(x, _, a, b)| Witness::Ray {
                x,
                t1: f64::from_bits(a),
                t2: f64::from_bits(b),
            },
        ),
        height_ratio: finish(ratio, (n * (n - 1)) as u64, |(x, y, _, _)| {
            Witness::Points { x, y }
        }),
        monotone_checked,
        pair_distance: finish(pair_distance, pair_evals, |(x, y, t, _)| {
            Witness::PointsAt {
                x,
                y,
                s: log2_recip(f64::from_bits(t)),
            }
        }),
    })
}

/// `max |Phi_x(t) - alpha t|` over `t` in `[m_x, M_x]` and every `x`. Both
/// sides are affine between spectrum levels, so the levels attain it.
pub fn check_snowflake_alignment<T: Scalar>(ext: &ConeMapExtension<T>, alpha: T) -> Fitted<T> {
    let mut best = Best::none();
    let mut count = 0u64;
    for (x, spec) in ext.spectra.iter().enumerate() {
        for (i, (&l, &v)) in spec.levels.iter().zip(&spec.phi).enumerate() {
            let dev = (T::from_level(v) - alpha * T::from_level(l)).abs();
            best.offer(dev, (x, i, 0, 0));
            count += 1;
        }
    }
    finish(best, count, |(x, i, _, _)| Witness::Level {
        x,
        l: ext.spectra[x].levels[i],
    })
}
