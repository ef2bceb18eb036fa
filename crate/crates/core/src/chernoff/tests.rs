use super::*;
use crate::distributions::{Outcome, Sign};
use crate::testutil::{any_pair, mixture_pair};
use proptest::prelude::*;

const TOL: f64 = 1e-10;

/// K(s) for two Poisson distributions: mu+^s mu-^(1-s) - s mu+ - (1-s) mu-.
fn poisson_oracle(mp: f64, mm: f64) -> (f64, f64, f64, f64) {
    let l = (mp / mm).ln();
    let g = (mp - mm) / l;
    let s = (g / mm).ln() / l;
    let k = g - s * mp - (1.0 - s) * mm;
    let k2 = g * l * l;
    let c = -k;
    (c, s, k2, 2.0 * (s * (1.0 - s)).powi(2) * k2 / c)
}

fn binary_cgf_oracle(ep: f64, em: f64, s: f64) -> f64 {
    ((1.0 - ep).powf(s) * em.powf(1.0 - s) + ep.powf(s) * (1.0 - em).powf(1.0 - s)).ln()
}

/// Composite Simpson rule in x = tan(theta) for the Cauchy pair at s.
fn cauchy_cgf_oracle(gamma: f64, s: f64) -> f64 {
    let n = 400_000;
    let h = std::f64::consts::PI / n as f64;
    let pdf = |x: f64, loc: f64| gamma / std::f64::consts::PI / ((x - loc).powi(2) + gamma * gamma);
    let f = |t: f64| {
        let x = t.tan();
        let jac = 1.0 + x * x;
        pdf(x, 1.0).powf(s) * pdf(x, -1.0).powf(1.0 - s) * jac
    };
    let a = -std::f64::consts::FRAC_PI_2;
    let mut sum = 0.0;
    for i in 1..n {
        let t = a + i as f64 * h;
        sum += if i % 2 == 1 { 4.0 } else { 2.0 } * f(t);
    }
    // endpoints: the integrand tends to gamma/pi there
    sum += 2.0 * gamma / std::f64::consts::PI;
    (sum * h / 3.0).ln()
}

#[test]
fn cgf_vanishes_at_the_endpoints() {
    let pairs = [
        OutcomePair::gaussian(3.0).unwrap(),
        OutcomePair::poissonian(2.0, 0.5).unwrap(),
        OutcomePair::cauchy(0.5).unwrap(),
        OutcomePair::binary(0.1, 0.3).unwrap(),
        OutcomePair::gaussian_with_conversion(2.0, 0.1).unwrap(),
    ];
    for p in &pairs {
        assert!(cgf(p, 0.0).unwrap().k_minus.abs() < 1e-9);
        assert!(cgf(p, 1.0).unwrap().k_minus.abs() < 1e-9);
    }
}

#[test]
fn gaussian_cgf_at_half() {
    // sqrt(N(1, v) N(-1, v)) integrates to exp(-(2^2) / (8 v)) with v = 1/r
    for r in [0.1, 1.0, 7.0, 40.0] {
        let k = cgf(&OutcomePair::gaussian(r).unwrap(), 0.5)
            .unwrap()
            .k_minus;
        let want = -4.0 * r / 8.0;
        assert!((k - want).abs() < 1e-12 * (1.0 + r), "r={r}: {k}");
    }
}

#[test]
fn gaussian_cgf_is_quadratic() {
    // completing the square: K(s) = -2 r s (1 - s)
    let pair = OutcomePair::gaussian(2.5).unwrap();
    for s in [0.05, 0.3, 0.77] {
        let k = cgf(&pair, s).unwrap().k_minus;
        assert!((k + 2.0 * 2.5 * s * (1.0 - s)).abs() < 1e-12);
    }
}

#[test]
fn cgf_rejects_s_outside_unit_interval() {
    let pair = OutcomePair::gaussian(1.0).unwrap();
    assert!(cgf(&pair, -0.1).is_err());
    assert!(cgf(&pair, 1.5).is_err());
}

#[test]
fn gaussian_closed_form() {
    for r in [0.1, 1.0, 10.0] {
        let s = chernoff_information(&OutcomePair::gaussian(r).unwrap(), TOL).unwrap();
        assert!((s.c - r / 2.0).abs() < 1e-8, "r={r}: {}", s.c);
        assert!((s.s_star - 0.5).abs() < 1e-9);
        assert!((s.k2 - 4.0 * r).abs() < 1e-8 * r);
        assert!((s.alpha - 1.0).abs() < 1e-8);
        assert!((s.bhattacharyya - r / 2.0).abs() < 1e-10);
    }
}

#[test]
fn unit_snr_gaussian_matches_published_values() {
    let s = chernoff_information(&OutcomePair::gaussian(1.0).unwrap(), TOL).unwrap();
    assert!((s.c - 0.5).abs() < 1e-4);
    assert!((s.alpha - 1.0).abs() < 1e-4);
    assert!((s.s_star - 0.5).abs() < 1e-4);
}

#[test]
fn poisson_against_closed_form() {
    for (mp, mm) in [(2.0, 0.5), (10.0, 3.0), (0.3, 4.0), (2.9048475929, 1.0)] {
        let s = chernoff_information(&OutcomePair::poissonian(mp, mm).unwrap(), TOL).unwrap();
        let (c, sstar, k2, alpha) = poisson_oracle(mp, mm);
        assert!(
            (s.c - c).abs() < 1e-11 * (1.0 + c),
            "{mp},{mm}: {} vs {c}",
            s.c
        );
        assert!((s.s_star - sstar).abs() < 1e-9);
        assert!((s.k2 - k2).abs() < 1e-9 * k2);
        assert!((s.alpha - alpha).abs() < 1e-9);
    }
}

#[test]
fn poisson_figure_values() {
    let s = chernoff_information(&OutcomePair::poissonian(2.0, 0.5).unwrap(), TOL).unwrap();
    assert!((s.c - 0.2533).abs() < 5e-5, "{}", s.c);
    assert!((s.alpha - 0.9999).abs() < 5e-5, "{}", s.alpha);
    assert!((s.s_star - 0.5569).abs() < 5e-5, "{}", s.s_star);
}

#[test]
fn cauchy_figure_values() {
    let s = chernoff_information(&OutcomePair::cauchy(0.5).unwrap(), TOL).unwrap();
    assert!((s.c - 0.4422).abs() < 5e-5, "{}", s.c);
    assert!((s.alpha - 1.1079).abs() < 5e-5, "{}", s.alpha);
    assert!((s.s_star - 0.5).abs() < 1e-9);
}

#[test]
fn cauchy_against_independent_quadrature() {
    for gamma in [0.2, 0.5, 2.0] {
        let pair = OutcomePair::cauchy(gamma).unwrap();
        for s in [0.2, 0.5] {
            let k = cgf(&pair, s).unwrap().k_minus;
            let want = cauchy_cgf_oracle(gamma, s);
            assert!(
                (k - want).abs() < 1e-8,
                "gamma={gamma}, s={s}: {k} vs {want}"
            );
        }
    }
}

#[test]
fn symmetric_binary_closed_form_and_grid() {
    let s = chernoff_information(&OutcomePair::binary(0.2, 0.2).unwrap(), TOL).unwrap();
    let closed = (1.0 / (4.0f64 * 0.2 * 0.8).sqrt()).ln();
    assert!((s.c - closed).abs() < 1e-12);
    assert!((closed - 0.22314).abs() < 1e-5);
    let grid = (0..=100_000)
        .map(|i| binary_cgf_oracle(0.2, 0.2, i as f64 / 100_000.0))
        .fold(f64::INFINITY, f64::min);
    assert!((s.c + grid).abs() < 1e-9);
}

#[test]
fn asymmetric_binary_against_grid() {
    let (ep, em) = (0.03, 0.25);
    let s = chernoff_information(&OutcomePair::binary(ep, em).unwrap(), TOL).unwrap();
    let (mut best, mut at) = (f64::INFINITY, 0.0);
    for i in 0..=200_000 {
        let x = i as f64 / 200_000.0;
        let k = binary_cgf_oracle(ep, em, x);
        if k < best {
            best = k;
            at = x;
        }
    }
    assert!((s.c + best).abs() < 1e-9);
    assert!((s.s_star - at).abs() < 1e-5);
}

#[test]
fn identical_distributions_are_degenerate() {
    let pair = OutcomePair::poissonian(3.0, 3.0).unwrap();
    let s = chernoff_information(&pair, TOL).unwrap();
    assert!(s.degenerate);
    assert!(s.c < 1e-12 && s.bhattacharyya < 1e-12);
    let pair = OutcomePair::new(
        Density::normal(1.0, 2.0).unwrap(),
        Density::normal(1.0, 2.0).unwrap(),
    )
    .unwrap();
    let s = chernoff_information(&pair, TOL).unwrap();
    assert!(s.degenerate && s.c < 1e-12);
}

#[test]
fn disjoint_supports_are_unbounded() {
    let pair = OutcomePair::binary(0.0, 0.0).unwrap();
    assert_eq!(
        chernoff_information(&pair, TOL),
        Err(ReadoutError::Unbounded)
    );
}

#[test]
fn one_sided_binary_optimum_sits_on_the_boundary() {
    // P+ never errs: K(s) = (1-s) ln eps- on (0, 1], infimum as s -> 0+
    let s = chernoff_information(&OutcomePair::binary(0.0, 0.1).unwrap(), TOL).unwrap();
    assert!(s.boundary);
    assert_eq!(s.s_star, 0.0);
    assert!((s.c + 0.1f64.ln()).abs() < 1e-12);
    assert!(s.alpha.is_nan());
    let s = chernoff_information(&OutcomePair::binary(0.1, 0.0).unwrap(), TOL).unwrap();
    assert_eq!(s.s_star, 1.0);
    assert!((s.c + 0.1f64.ln()).abs() < 1e-12);
}

#[test]
fn summary_serializes_flat() {
    let s = chernoff_information(&OutcomePair::gaussian(1.0).unwrap(), TOL).unwrap();
    let v: serde_json::Value = serde_json::to_value(s).unwrap();
    for key in ["C", "s_star", "alpha", "k2", "bhattacharyya", "tolerance"] {
        assert!(v.get(key).is_some_and(|x| x.is_number()), "{key}");
    }
    let back: ChernoffSummary = serde_json::from_value(v).unwrap();
    assert_eq!(back, s);
    let b = chernoff_information(&OutcomePair::binary(0.0, 0.1).unwrap(), TOL).unwrap();
    let json = serde_json::to_string(&b).unwrap();
    assert!(json.contains("\"alpha\":null"));
    assert!(serde_json::from_str::<ChernoffSummary>(&json)
        .unwrap()
        .alpha
        .is_nan());
}

#[test]
fn gaussian_effective_distribution_is_centered_normal() {
    let r = 3.0;
    let eff = effective_distribution(&OutcomePair::gaussian(r).unwrap(), 0.5).unwrap();
    let want = Density::normal(0.0, (1.0 / r).sqrt()).unwrap();
    for x in [-1.0, -0.2, 0.0, 0.4, 1.3] {
        let o = Outcome::Real(x);
        assert!((eff.log_density(&o) - want.log_density(&o)).abs() < 1e-12);
    }
}

#[test]
fn symmetric_binary_effective_distribution_is_uniform() {
    let eff = effective_distribution(&OutcomePair::binary(0.3, 0.3).unwrap(), 0.5).unwrap();
    for b in Sign::BOTH {
        assert!((eff.log_density(&Outcome::Binary(b)).exp() - 0.5).abs() < 1e-14);
    }
    assert!(effective_distribution(&OutcomePair::binary(0.3, 0.3).unwrap(), 0.0).is_err());
}

#[test]
fn gaussian_cumulants() {
    let r = 1.7;
    let k = cumulants_under_eff(&OutcomePair::gaussian(r).unwrap(), 0.5, 4).unwrap();
    assert!((k[0] - 4.0 * r).abs() < 1e-9);
    assert!(k[1].abs() < 1e-9);
    assert!(k[2].abs() < 1e-8);
    assert!(cumulants_under_eff(&OutcomePair::gaussian(r).unwrap(), 0.5, 5).is_err());
}

#[test]
fn cumulants_match_finite_differences() {
    let pair = OutcomePair::binary(0.2, 0.2).unwrap();
    let s = chernoff_information(&pair, TOL).unwrap();
    let k = cumulants_under_eff(&pair, s.s_star, 3).unwrap();
    let h = 1e-4;
    let f = |x: f64| binary_cgf_oracle(0.2, 0.2, x);
    let d2 = (f(s.s_star + h) - 2.0 * f(s.s_star) + f(s.s_star - h)) / (h * h);
    assert!((k[0] - d2).abs() < 1e-6, "{} vs {d2}", k[0]);
    assert!((s.k2 - d2).abs() < 1e-6);

    // third cumulant of an asymmetric Poisson pair against K''' = g ln^3(mu+/mu-)
    let pair = OutcomePair::poissonian(4.0, 1.0).unwrap();
    let s = chernoff_information(&pair, TOL).unwrap();
    let k = cumulants_under_eff(&pair, s.s_star, 4).unwrap();
    let l = 4f64.ln();
    let g = 4f64.powf(s.s_star);
    assert!((k[1] - g * l.powi(3)).abs() < 1e-8);
    assert!((k[2] - g * l.powi(4)).abs() < 1e-8);
}

#[test]
fn saddle_point_condition_holds() {
    let pairs = [
        OutcomePair::poissonian(2.0, 0.5).unwrap(),
        OutcomePair::cauchy(0.5).unwrap(),
        OutcomePair::binary(0.05, 0.3).unwrap(),
        OutcomePair::gaussian_with_conversion(2.0, 0.1).unwrap(),
    ];
    for p in &pairs {
        let s = chernoff_information(p, TOL).unwrap();
        let eff = effective_distribution(p, s.s_star).unwrap();
        let pair = OutcomePair::new(eff.clone(), eff).unwrap();
        let q = pair
            .integrate(|le, _| (le, [1.0]), &QuadOptions::default())
            .unwrap();
        assert!((q.component(0) - 1.0).abs() < 1e-9);
        let mean = tilted_moments::<2>(p, s.s_star, 0.0, &QuadOptions::default())
            .unwrap()
            .ratio(1);
        assert!(mean.abs() < 1e-8, "{mean}");
    }
}

#[test]
fn swapped_pair_mirrors_optimizer() {
    let pairs = [
        OutcomePair::poissonian(2.0, 0.5).unwrap(),
        OutcomePair::cauchy(0.7).unwrap(),
        OutcomePair::binary(0.05, 0.3).unwrap(),
        OutcomePair::gaussian_with_conversion(2.0, 0.1).unwrap(),
    ];
    for p in &pairs {
        let a = chernoff_information(p, TOL).unwrap();
        let b = chernoff_information(&p.swapped(), TOL).unwrap();
        assert!((a.c - b.c).abs() < 1e-9);
        assert!((a.alpha - b.alpha).abs() < 1e-9);
        assert!((a.bhattacharyya - b.bhattacharyya).abs() < 1e-9);
        assert!((a.s_star + b.s_star - 1.0).abs() < 1e-9);
    }
}

#[test]
fn affine_reparameterization_leaves_summary_unchanged() {
    let r = 2.0;
    let base = chernoff_information(&OutcomePair::gaussian(r).unwrap(), TOL).unwrap();
    for (a, b) in [(0.3, -2.0), (7.0, 5.0), (-2.0, 1.0)] {
        let sd = f64::abs(a) / r.sqrt();
        let pair = OutcomePair::new(
            Density::normal(a + b, sd).unwrap(),
            Density::normal(-a + b, sd).unwrap(),
        )
        .unwrap();
        let s = chernoff_information(&pair, TOL).unwrap();
        assert!((s.c - base.c).abs() < 1e-8);
        assert!((s.s_star - base.s_star).abs() < 1e-8);
        assert!((s.alpha - base.alpha).abs() < 1e-8);
    }
}

#[test]
fn small_c_gaussian_limit_is_monotone() {
    let mut last: Option<ChernoffSummary> = None;
    for r in [0.5, 0.1, 0.02] {
        let s = chernoff_information(&OutcomePair::gaussian(r).unwrap(), TOL).unwrap();
        assert!((s.alpha - 1.0).abs() < 1e-8 && (s.s_star - 0.5).abs() < 1e-8);
        if let Some(prev) = last {
            assert!((s.alpha - 1.0).abs() <= (prev.alpha - 1.0).abs() + 1e-9);
            assert!((s.s_star - 0.5).abs() <= (prev.s_star - 0.5).abs() + 1e-9);
        }
        last = Some(s);
    }
}

/// <y^2>/8 for Gaussian(r) by Simpson's rule, with y = 2 tanh(r x).
fn gaussian_y2_oracle(r: f64) -> f64 {
    let sd = (1.0 / r).sqrt();
    let (a, b, n) = (-1.0 - 40.0 * sd, 1.0 + 40.0 * sd, 200_000);
    let h = (b - a) / n as f64;
    let pdf = |x: f64, m: f64| {
        (-(x - m).powi(2) / (2.0 * sd * sd)).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
    };
    let f = |x: f64| 0.5 * (pdf(x, 1.0) + pdf(x, -1.0)) * (2.0 * (r * x).tanh()).powi(2);
    let mut sum = f(a) + f(b);
    for i in 1..n {
        sum += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    sum * h / 3.0
}

#[test]
fn small_c_expansion_gaussian() {
    let mut last = f64::INFINITY;
    for r in [0.05, 0.02, 0.01] {
        let e = small_c_expansion(&OutcomePair::gaussian(r).unwrap()).unwrap();
        let y2 = gaussian_y2_oracle(r);
        assert!((e.moments[0] - y2).abs() < 1e-10 * y2);
        assert!((e.c - y2 / 8.0).abs() < 1e-10 * y2);
        assert_eq!(e.s_star, 0.5);
        assert!((e.alpha - 1.0).abs() < 0.01);
        assert!(!e.unreliable);
        // leading-order truncation: the deviation from r/2 shrinks linearly with r
        let rel = (e.c - r / 2.0).abs() / (r / 2.0);
        assert!(rel < last && rel < 1.1 * r, "r={r}: {rel}");
        last = rel;
    }
}

#[test]
fn small_c_expansion_of_identical_pair() {
    let pair = OutcomePair::poissonian(2.0, 2.0).unwrap();
    let e = small_c_expansion(&pair).unwrap();
    assert_eq!((e.c, e.alpha, e.s_star), (0.0, 1.0, 0.5));
}

#[test]
fn small_c_expansion_tracks_exact_values_for_weak_poisson() {
    let pair = OutcomePair::poissonian(1.2, 1.0).unwrap();
    let e = small_c_expansion(&pair).unwrap();
    let (c, s, _, alpha) = poisson_oracle(1.2, 1.0);
    // truncation error is of relative order C
    assert!((e.c - c).abs() / c < 0.02);
    assert!((e.s_star - s).abs() < 5e-4);
    assert!((e.alpha - alpha).abs() < 5e-4);
}

#[test]
fn small_c_expansion_flags_large_c() {
    let e = small_c_expansion(&OutcomePair::gaussian(4.0).unwrap()).unwrap();
    assert!(e.unreliable);
}

#[test]
fn cgf_is_convex_on_a_grid() {
    let pairs = [
        OutcomePair::poissonian(2.0, 0.5).unwrap(),
        OutcomePair::cauchy(0.5).unwrap(),
        OutcomePair::binary(0.1, 0.4).unwrap(),
        OutcomePair::gaussian_with_conversion(3.0, 0.05).unwrap(),
    ];
    for p in &pairs {
        let k: Vec<f64> = (0..=100)
            .map(|i| cgf(p, i as f64 / 100.0).unwrap().k_minus)
            .collect();
        for w in k.windows(3) {
            assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn bhattacharyya_is_bracketed_by_chernoff(pair in mixture_pair()) {
        let s = chernoff_information(&pair, TOL).unwrap();
        prop_assert!(s.c >= 0.0);
        prop_assert!(s.bhattacharyya >= s.c / 2.0 - 1e-9);
        prop_assert!(s.bhattacharyya <= s.c + 1e-9);
        prop_assert!((0.0..=1.0).contains(&s.s_star));
        if !s.degenerate && !s.boundary {
            let alpha = 2.0 * (s.s_star * (1.0 - s.s_star)).powi(2) * s.k2 / s.c;
            prop_assert!((alpha - s.alpha).abs() < 1e-12 * alpha);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cgf_is_convex_for_random_pairs(pair in any_pair()) {
        let k: Vec<f64> = (0..=100).map(|i| cgf(&pair, i as f64 / 100.0).unwrap().k_minus).collect();
        prop_assert!(k[0].abs() < 1e-9 && k[100].abs() < 1e-9);
        for w in k.windows(3) {
            prop_assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-9);
        }
    }

    #[test]
    fn swap_symmetry_for_random_pairs(pair in any_pair()) {
        let a = chernoff_information(&pair, TOL).unwrap();
        let b = chernoff_information(&pair.swapped(), TOL).unwrap();
        prop_assert!((a.c - b.c).abs() < 1e-9);
        prop_assert!((a.bhattacharyya - b.bhattacharyya).abs() < 1e-9);
        if !a.degenerate {
            // C carries an absolute error near machine epsilon, so alpha = .../C
            // is only resolved to about 1e-15 / C
            let tol = 1e-9 + 1e-14 / a.c;
            prop_assert!((a.alpha - b.alpha).abs() < tol * a.alpha, "{} vs {}", a.alpha, b.alpha);
            prop_assert!((a.s_star + b.s_star - 1.0).abs() < 1e-9);
        }
    }
}
