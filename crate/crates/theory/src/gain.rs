use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::generator::max_gap;
use crate::instance::{random_simplex, Mechanism};
use crate::{TheoryError, PROB_TOL};

const MAX_COORDS: usize = 8;

/// Joint law of an always-observed `Xᵒ`, a tuple `Xᵐ = (X₁, …, X_d)` and its
/// per-coordinate response mask `M`, on finite domains.
///
/// Tuples use mixed radix with coordinate 0 least significant; masks are bit
/// sets with bit `i` set when `Xᵢ` is observed.
#[derive(Debug, Clone, PartialEq)]
pub struct GainInstance {
    n_o: usize,
    cards: Vec<usize>,
    n_x: usize,
    /// Indexed `(xo · n_x + x) · 2^d + m`.
    joint: Vec<f64>,
    mar_gap: f64,
}

impl GainInstance {
    pub fn new(n_o: usize, cards: Vec<usize>, joint: Vec<f64>) -> Result<Self, TheoryError> {
        let bad = |msg: String| Err(TheoryError::InvalidInstance(msg));
        if n_o == 0 || cards.is_empty() || cards.contains(&0) {
            return bad("every domain needs at least one value".into());
        }
        if cards.len() > MAX_COORDS {
            return bad(format!(
                "at most {MAX_COORDS} maskable coordinates are supported"
            ));
        }
        let n_x: usize = cards.iter().product();
        let expected = (n_o * n_x) << cards.len();
        if joint.len() != expected {
            return bad(format!(
                "joint has {} entries, expected {expected}",
                joint.len()
            ));
        }
        if let Some(v) = joint.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return bad(format!("probability {v} is not a nonnegative number"));
        }
        let total: f64 = joint.iter().sum();
        if (total - 1.0).abs() > PROB_TOL {
            return bad(format!("probabilities sum to {total}"));
        }
        let mut inst = Self {
            n_o,
            cards,
            n_x,
            joint,
            mar_gap: 0.0,
        };
        inst.mar_gap = inst.compute_mar_gap();
        Ok(inst)
    }

    pub fn from_file(file: &GainInstanceFile) -> Result<Self, TheoryError> {
        let d = file.cards.len();
        let n_x: usize = file.cards.iter().product();
        if d == 0 || d > MAX_COORDS || n_x == 0 {
            return Err(TheoryError::InvalidInstance(
                "cards must list 1 to 8 nonzero sizes".into(),
            ));
        }
        let mut joint = vec![0.0; (file.n_o * n_x) << d];
        for cell in &file.cells {
            if cell.xo >= file.n_o || cell.xm.len() != d || cell.mask.len() != d {
                return Err(TheoryError::InvalidInstance(format!(
                    "cell {cell:?} does not fit the domains"
                )));
            }
            let mut x = 0;
            for (i, (&v, &c)) in cell.xm.iter().zip(&file.cards).enumerate().rev() {
                if v >= c {
                    return Err(TheoryError::InvalidInstance(format!(
                        "xm[{i}] = {v} is outside 0..{c}"
                    )));
                }
                x = x * c + v;
            }
            let mut m = 0;
            for (i, &b) in cell.mask.iter().enumerate() {
                match b {
                    0 => {}
                    1 => m |= 1 << i,
                    _ => {
                        return Err(TheoryError::InvalidInstance(format!(
                            "mask entry {b} is not 0 or 1"
                        )))
                    }
                }
            }
            joint[((cell.xo * n_x + x) << d) + m] += cell.p;
        }
        Self::new(file.n_o, file.cards.clone(), joint)
    }

    /// `p(xᵒ) p(xᵐ | xᵒ) p(m | ·)` with each factor uniform on its simplex and
    /// the mask law depending on the variables as `mechanism` allows.
    pub fn random<R: Rng + ?Sized>(
        n_o: usize,
        cards: &[usize],
        mechanism: Mechanism,
        rng: &mut R,
    ) -> Self {
        let n_x: usize = cards.iter().product();
        let n_masks = 1 << cards.len();
        let p_o = random_simplex(n_o, rng);
        let mcar = random_simplex(n_masks, rng);
        let mut joint = vec![0.0; n_o * n_x * n_masks];
        for (o, po) in p_o.iter().enumerate() {
            let p_x = random_simplex(n_x, rng);
            let mar = random_simplex(n_masks, rng);
            for (x, px) in p_x.iter().enumerate() {
                let masks = match mechanism {
                    Mechanism::Mcar => mcar.clone(),
                    Mechanism::Mar => mar.clone(),
                    Mechanism::Mnar => random_simplex(n_masks, rng),
                };
                for (m, pm) in masks.iter().enumerate() {
                    joint[(o * n_x + x) * n_masks + m] = po * px * pm;
                }
            }
        }
        let s: f64 = joint.iter().sum();
        joint.iter_mut().for_each(|v| *v /= s);
        Self::new(n_o, cards.to_vec(), joint).expect("random tables are valid")
    }

    pub fn n_o(&self) -> usize {
        self.n_o
    }

    pub fn dims(&self) -> usize {
        self.cards.len()
    }

    pub fn n_masks(&self) -> usize {
        1 << self.cards.len()
    }

    pub fn full_mask(&self) -> usize {
        self.n_masks() - 1
    }

    pub fn is_mar(&self) -> bool {
        self.mar_gap <= PROB_TOL
    }

    /// Largest `|p(m | xᵒ, xᵐ) − p(m | xᵒ)|`.
    pub fn mar_gap(&self) -> f64 {
        self.mar_gap
    }

    pub fn p(&self, xo: usize, x: usize, m: usize) -> f64 {
        self.joint[(xo * self.n_x + x) * self.n_masks() + m]
    }

    pub fn p_o(&self, xo: usize) -> f64 {
        (0..self.n_x)
            .flat_map(|x| (0..self.n_masks()).map(move |m| (x, m)))
            .map(|(x, m)| self.p(xo, x, m))
            .sum()
    }

    pub fn p_om(&self, xo: usize, m: usize) -> f64 {
        (0..self.n_x).map(|x| self.p(xo, x, m)).sum()
    }

    /// `p(xᵐ | xᵒ)`, or `None` if `p(xᵒ) = 0`.
    pub fn data_conditional(&self, xo: usize) -> Option<Vec<f64>> {
        let z = self.p_o(xo);
        (z > 0.0).then(|| {
            (0..self.n_x)
                .map(|x| (0..self.n_masks()).map(|m| self.p(xo, x, m)).sum::<f64>() / z)
                .collect()
        })
    }

    /// `p(xᵐ | xᵒ, M = m)`, or `None` if `p(xᵒ, m) = 0`.
    pub fn mask_conditional(&self, xo: usize, m: usize) -> Option<Vec<f64>> {
        let z = self.p_om(xo, m);
        (z > 0.0).then(|| (0..self.n_x).map(|x| self.p(xo, x, m) / z).collect())
    }

    fn digit(&self, x: usize, i: usize) -> usize {
        let stride: usize = self.cards[..i].iter().product();
        x / stride % self.cards[i]
    }

    /// `x` with every unobserved coordinate set to 0.
    fn canonical(&self, x: usize, m: usize) -> usize {
        let mut out = 0;
        let mut stride = 1;
        for (i, &c) in self.cards.iter().enumerate() {
            if m >> i & 1 == 1 {
                out += self.digit(x, i) * stride;
            }
            stride *= c;
        }
        out
    }

    /// Tuples that agree with `x` on the coordinates observed in `m`.
    fn completions(&self, x: usize, m: usize) -> Vec<usize> {
        let key = self.canonical(x, m);
        (0..self.n_x)
            .filter(|&y| self.canonical(y, m) == key)
            .collect()
    }

    fn compute_mar_gap(&self) -> f64 {
        let mut worst = 0.0f64;
        for o in 0..self.n_o {
            let po = self.p_o(o);
            if po == 0.0 {
                continue;
            }
            for x in 0..self.n_x {
                let pox: f64 = (0..self.n_masks()).map(|m| self.p(o, x, m)).sum();
                if pox == 0.0 {
                    continue;
                }
                for m in 0..self.n_masks() {
                    worst = worst.max((self.p(o, x, m) / pox - self.p_om(o, m) / po).abs());
                }
            }
        }
        worst
    }
}

/// One nonzero cell of a [`GainInstanceFile`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainCell {
    pub xo: usize,
    pub xm: Vec<usize>,
    /// 1 observed, 0 missing, one entry per coordinate of `xm`.
    pub mask: Vec<u8>,
    pub p: f64,
}

/// Text form of a [`GainInstance`]; unlisted cells have probability zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainInstanceFile {
    pub n_o: usize,
    pub cards: Vec<usize>,
    pub cells: Vec<GainCell>,
}

/// An imputation kernel that sees `xᵒ`, the mask and the observed coordinates
/// only: `g(x̂ᵐ | xᵒ, m, xᵐ_obs)`, supported on tuples that keep the observed
/// coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct GainGenerator {
    n_x: usize,
    n_masks: usize,
    /// Indexed `((xo · 2^d + m) · n_x + canonical x) · n_x + x̂`.
    kernel: Vec<f64>,
}

impl GainGenerator {
    /// `fill(xo, m, completions)` returns weights over `completions`.
    pub fn from_fn(
        inst: &GainInstance,
        mut fill: impl FnMut(usize, usize, &[usize]) -> Vec<f64>,
    ) -> Result<Self, TheoryError> {
        let (n_x, n_masks) = (inst.n_x, inst.n_masks());
        let mut kernel = vec![0.0; inst.n_o * n_masks * n_x * n_x];
        for o in 0..inst.n_o {
            for m in 0..n_masks {
                for x in 0..n_x {
                    if inst.canonical(x, m) != x {
                        continue;
                    }
                    let targets = inst.completions(x, m);
                    let weights = fill(o, m, &targets);
                    let s: f64 = weights.iter().sum();
                    if weights.len() != targets.len()
                        || weights.iter().any(|w| !(w.is_finite() && *w >= 0.0))
                        || (s - 1.0).abs() > PROB_TOL
                    {
                        return Err(TheoryError::InvalidGenerator(format!(
                            "fill for xo={o}, mask={m:b}, x={x} is not a distribution over {} completions",
                            targets.len()
                        )));
                    }
                    let base = ((o * n_masks + m) * n_x + x) * n_x;
                    for (t, w) in targets.iter().zip(weights) {
                        kernel[base + t] = w;
                    }
                }
            }
        }
        Ok(Self {
            n_x,
            n_masks,
            kernel,
        })
    }

    pub fn random<R: Rng + ?Sized>(inst: &GainInstance, rng: &mut R) -> Self {
        Self::from_fn(inst, |_, _, targets| random_simplex(targets.len(), rng))
            .expect("simplex fills are valid")
    }

    /// Fills from the complete cases: `p(xᵐ_mis | xᵒ, xᵐ_obs, M = 1)`, uniform
    /// where the complete cases never show the observed part.
    pub fn complete_case(inst: &GainInstance) -> Self {
        let full = inst.full_mask();
        Self::from_fn(inst, |o, _, targets| {
            let w: Vec<f64> = targets.iter().map(|&t| inst.p(o, t, full)).collect();
            let s: f64 = w.iter().sum();
            if s > 0.0 {
                w.into_iter().map(|v| v / s).collect()
            } else {
                vec![1.0 / targets.len() as f64; targets.len()]
            }
        })
        .expect("normalized fills are valid")
    }

    fn prob(&self, o: usize, m: usize, x_canon: usize, xh: usize) -> f64 {
        self.kernel[((o * self.n_masks + m) * self.n_x + x_canon) * self.n_x + xh]
    }
}

/// `p(xᵒ, x̂ᵐ, m)` under a generator, indexed like the instance.
fn induced(inst: &GainInstance, gen: &GainGenerator) -> Vec<f64> {
    let (n_x, n_masks) = (inst.n_x, inst.n_masks());
    let mut r = vec![0.0; inst.joint.len()];
    for o in 0..inst.n_o {
        for x in 0..n_x {
            for m in 0..n_masks {
                let p = inst.p(o, x, m);
                if p == 0.0 {
                    continue;
                }
                let c = inst.canonical(x, m);
                for xh in 0..n_x {
                    r[(o * n_x + xh) * n_masks + m] += p * gen.prob(o, m, c, xh);
                }
            }
        }
    }
    r
}

/// Hint states: the hidden coordinate `j` and the mask with bit `j` cleared.
/// Every `(j, m)` pair maps to one of these with probability `1/d`.
#[derive(Debug, Clone, Copy)]
struct Hint {
    hidden: usize,
    rest: usize,
}

impl Hint {
    fn of(m: usize, hidden: usize) -> Self {
        Self {
            hidden,
            rest: m & !(1 << hidden),
        }
    }

    fn masks(self) -> [usize; 2] {
        [self.rest, self.rest | 1 << self.hidden]
    }

    fn all(d: usize) -> impl Iterator<Item = Hint> {
        (0..d).flat_map(move |j| {
            (0..1usize << d)
                .filter(move |m| m >> j & 1 == 0)
                .map(move |m| Hint::of(m, j))
        })
    }
}

/// Mass and normalized law of `x̂ᵐ` given `xᵒ` over a set of masks, with each
/// mask weighted by `weight`.
fn mix(inst: &GainInstance, r: &[f64], o: usize, masks: &[usize], weight: f64) -> (f64, Vec<f64>) {
    let n_masks = inst.n_masks();
    let mut dist: Vec<f64> = (0..inst.n_x)
        .map(|xh| {
            masks
                .iter()
                .map(|&m| r[(o * inst.n_x + xh) * n_masks + m] * weight)
                .sum()
        })
        .collect();
    let mass: f64 = dist.iter().sum();
    if mass > 0.0 {
        dist.iter_mut().for_each(|v| *v /= mass);
    }
    (mass, dist)
}

fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&a, _)| a > 0.0)
        .map(|(&a, &b)| a * (a / b).ln())
        .sum()
}

/// Deviation from the per-coordinate fixed-point condition,
/// `max |p(x̂ᵐ | xᵒ, h, mᵢ = t) − p(x̂ᵐ | xᵒ, h)|`, and the weighted KL sum whose
/// minimum it characterizes.
fn fixed_point(inst: &GainInstance, r: &[f64]) -> (f64, f64) {
    let d = inst.dims();
    let w = 1.0 / d as f64;
    let mut dev = 0.0f64;
    let mut kl_sum = 0.0;
    for h in Hint::all(d) {
        let both = h.masks();
        for o in 0..inst.n_o {
            let (_, given_h) = mix(inst, r, o, &both, w);
            for i in 0..d {
                for t in 0..2 {
                    let subset: Vec<usize> =
                        both.iter().copied().filter(|m| m >> i & 1 == t).collect();
                    let (mass, given_t) = mix(inst, r, o, &subset, w);
                    if mass > 0.0 {
                        dev = dev.max(max_gap(&given_t, &given_h));
                        kl_sum += mass * kl(&given_t, &given_h);
                    }
                }
            }
        }
    }
    (dev, kl_sum)
}

/// Every intermediate of the hint argument for one instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GainReport {
    pub is_mar: bool,
    /// `max_i |P(B = bᵢ) − 1/d|` under the induced law.
    pub hint_marginal_error: f64,
    /// `max |D*ᵢ(x̂, h) − hᵢ|` over revealed coordinates.
    pub revealed_error: f64,
    /// Fixed-point condition at the complete-case generator.
    pub fixed_point_deviation: f64,
    pub fixed_point_kl: f64,
    /// The two mask values of the hidden coordinate give the same law.
    pub flip_deviation: f64,
    /// Conditioning on the hint and `mᵢ` equals conditioning on the mask.
    pub hint_mask_deviation: f64,
    /// Largest step along any single-coordinate path from a mask to all-ones.
    pub chain_deviation: f64,
    /// `|p(x̂ᵐ | xᵒ, 1) − p(xᵐ | xᵒ, 1)|`.
    pub anchor_error: f64,
    /// `|p(xᵐ | xᵒ, 1) − p(xᵐ | xᵒ)|`, the step that needs MAR.
    pub mar_step_error: f64,
    /// `|p(x̂ᵐ | xᵒ) − p(xᵐ | xᵒ)|`.
    pub conclusion_error: f64,
    pub family_size: usize,
    /// Smallest KL sum over the other generators; positive means none of them
    /// satisfies the fixed-point condition by accident.
    pub min_family_kl: f64,
    pub holds: bool,
}

/// Walks the per-coordinate hint argument on the complete-case generator:
/// fixed point, flip invariance, single-coordinate chain to the all-ones mask,
/// and the resulting equality of imputed and data conditionals.
pub fn verify_gain_mar(
    inst: &GainInstance,
    family: &[GainGenerator],
) -> Result<GainReport, TheoryError> {
    let d = inst.dims();
    let full = inst.full_mask();
    for o in 0..inst.n_o {
        if inst.p_o(o) > 0.0 {
            if let Some(m) = (0..inst.n_masks()).find(|&m| inst.p_om(o, m) == 0.0) {
                return Err(TheoryError::Precondition(format!(
                    "mask {m:b} never occurs with xo={o}; the chain needs every mask"
                )));
            }
        }
    }
    let gen = GainGenerator::complete_case(inst);
    let r = induced(inst, &gen);
    let w = 1.0 / d as f64;

    let mut hint_marginal_error = 0.0f64;
    for j in 0..d {
        let mass: f64 = Hint::all(d)
            .filter(|h| h.hidden == j)
            .map(|h| {
                (0..inst.n_o)
                    .map(|o| mix(inst, &r, o, &h.masks(), w).0)
                    .sum::<f64>()
            })
            .sum();
        hint_marginal_error = hint_marginal_error.max((mass - w).abs());
    }

    let mut revealed_error = 0.0f64;
    for h in Hint::all(d) {
        for i in (0..d).filter(|&i| i != h.hidden) {
            let h_i = (h.rest >> i & 1) as f64;
            for o in 0..inst.n_o {
                for xh in 0..inst.n_x {
                    let at = |m: usize| r[(o * inst.n_x + xh) * inst.n_masks() + m];
                    let total: f64 = h.masks().iter().map(|&m| at(m)).sum();
                    if total > 0.0 {
                        let observed: f64 = h
                            .masks()
                            .iter()
                            .filter(|&&m| m >> i & 1 == 1)
                            .map(|&m| at(m))
                            .sum();
                        revealed_error = revealed_error.max((observed / total - h_i).abs());
                    }
                }
            }
        }
    }

    let (fixed_point_deviation, fixed_point_kl) = fixed_point(inst, &r);

    let given_mask = |o: usize, m: usize| mix(inst, &r, o, &[m], 1.0).1;
    let mut flip_deviation = 0.0f64;
    let mut hint_mask_deviation = 0.0f64;
    let mut chain_deviation = 0.0f64;
    let mut anchor_error = 0.0f64;
    let mut mar_step_error = 0.0f64;
    let mut conclusion_error = 0.0f64;
    for o in (0..inst.n_o).filter(|&o| inst.p_o(o) > 0.0) {
        for m in 0..inst.n_masks() {
            for i in 0..d {
                let h = Hint::of(m, i);
                let [m0, m1] = h.masks();
                let (_, via_hint0) = mix(inst, &r, o, &[m0], w);
                let (_, via_hint1) = mix(inst, &r, o, &[m1], w);
                flip_deviation = flip_deviation.max(max_gap(&via_hint0, &via_hint1));
                hint_mask_deviation = hint_mask_deviation
                    .max(max_gap(&via_hint0, &given_mask(o, m0)))
                    .max(max_gap(&via_hint1, &given_mask(o, m1)));
            }
            let mut current = m;
            for i in 0..d {
                if current >> i & 1 == 0 {
                    let next = current | 1 << i;
                    chain_deviation =
                        chain_deviation.max(max_gap(&given_mask(o, current), &given_mask(o, next)));
                    current = next;
                }
            }
        }
        let complete = inst.mask_conditional(o, full).expect("positivity checked");
        let truth = inst.data_conditional(o).expect("p(xo) > 0");
        anchor_error = anchor_error.max(max_gap(&given_mask(o, full), &complete));
        mar_step_error = mar_step_error.max(max_gap(&complete, &truth));
        let (_, imputed) = mix(inst, &r, o, &(0..inst.n_masks()).collect::<Vec<_>>(), 1.0);
        conclusion_error = conclusion_error.max(max_gap(&imputed, &truth));
    }

    let min_family_kl = family
        .iter()
        .map(|g| fixed_point(inst, &induced(inst, g)).1)
        .fold(f64::INFINITY, f64::min);

    let holds = [
        hint_marginal_error,
        revealed_error,
        fixed_point_deviation,
        flip_deviation,
        hint_mask_deviation,
        chain_deviation,
        anchor_error,
        mar_step_error,
        conclusion_error,
    ]
    .iter()
    .all(|&e| e <= PROB_TOL)
        && fixed_point_kl.abs() <= PROB_TOL
        && (family.is_empty() || min_family_kl > PROB_TOL);

    Ok(GainReport {
        is_mar: inst.is_mar(),
        hint_marginal_error,
        revealed_error,
        fixed_point_deviation,
        fixed_point_kl,
        flip_deviation,
        hint_mask_deviation,
        chain_deviation,
        anchor_error,
        mar_step_error,
        conclusion_error,
        family_size: family.len(),
        min_family_kl,
        holds,
    })
}
