//! Strategies shared by the property tests.

use proptest::prelude::*;

use crate::distributions::{Density, NormalComponent, OutcomePair};

fn component() -> impl Strategy<Value = NormalComponent> {
    (0.05f64..1.0, -3.0f64..3.0, 0.3f64..2.0).prop_map(|(weight, mean, sd)| NormalComponent {
        weight,
        mean,
        sd,
    })
}

fn mixture() -> impl Strategy<Value = Density> {
    prop::collection::vec(component(), 1..4).prop_map(|mut cs| {
        let total: f64 = cs.iter().map(|c| c.weight).sum();
        for c in &mut cs {
            c.weight /= total;
        }
        Density::mixture(cs).unwrap()
    })
}

/// Pairs of random Gaussian mixtures.
pub fn mixture_pair() -> impl Strategy<Value = OutcomePair> {
    (mixture(), mixture()).prop_map(|(p, m)| OutcomePair::new(p, m).unwrap())
}

/// A spread over every parametric family.
pub fn any_pair() -> impl Strategy<Value = OutcomePair> {
    prop_oneof![
        (0.01f64..20.0).prop_map(|r| OutcomePair::gaussian(r).unwrap()),
        (0.1f64..20.0, 0.1f64..20.0).prop_map(|(a, b)| OutcomePair::poissonian(a, b).unwrap()),
        (0.05f64..5.0).prop_map(|g| OutcomePair::cauchy(g).unwrap()),
        (0.05f64..20.0, 0.0f64..0.45)
            .prop_map(|(r, e)| OutcomePair::gaussian_with_conversion(r, e).unwrap()),
        (0.001f64..0.999, 0.001f64..0.999).prop_map(|(a, b)| OutcomePair::binary(a, b).unwrap()),
        mixture_pair(),
    ]
}
