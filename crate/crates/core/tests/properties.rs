use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use modshift::crt::{merge_config, split_config, CrtDecomposition};
use modshift::measure::stats::{fourier, Budget};
use modshift::measure::{CharacterSpec, MeasureHandle, Prob};
use modshift::shifts::{coset_from_cocycle, KernelShiftSpec};
use modshift::{Coord, LocalRule, ModuleSpec, Mode, Ring, ShiftPolynomial, WindowConfig, WindowSpec};

const RINGS: &[&str] = &[
    "zmod:2", "zmod:4", "zmod:6", "zmod:9", "zmod:12", "gf:2:2", "gf:2:3", "gf:3:2", "gf:5:1", "prod:[zmod:2;zmod:3]",
    "prod:[gf:2:2;zmod:4]",
];

fn ring_and_elems() -> impl Strategy<Value = (Ring, u32, u32, u32)> {
    (0..RINGS.len(), any::<u32>(), any::<u32>(), any::<u32>()).prop_map(|(i, a, b, c)| {
        let r = Ring::parse(RINGS[i]).unwrap();
        let q = r.size();
        (r, a % q, b % q, c % q)
    })
}

proptest! {
    #[test]
    fn ring_axioms((r, a, b, c) in ring_and_elems()) {
        prop_assert_eq!(r.add(a, b), r.add(b, a));
        prop_assert_eq!(r.mul(a, b), r.mul(b, a));
        prop_assert_eq!(r.add(r.add(a, b), c), r.add(a, r.add(b, c)));
        prop_assert_eq!(r.mul(r.mul(a, b), c), r.mul(a, r.mul(b, c)));
        prop_assert_eq!(r.mul(a, r.add(b, c)), r.add(r.mul(a, b), r.mul(a, c)));
        prop_assert_eq!(r.add(a, r.neg(a)), r.zero());
        prop_assert_eq!(r.mul(a, r.one()), a);
        if let Some(inv) = r.inverse(a) {
            prop_assert_eq!(r.mul(a, inv), r.one());
        }
        prop_assert_eq!(r.int_mul(3, a), r.add(a, r.add(a, a)));
    }

    #[test]
    fn descriptor_display_reparses(i in 0..RINGS.len()) {
        let r = Ring::parse(RINGS[i]).unwrap();
        let again = Ring::parse(&r.descriptor().to_string()).unwrap();
        prop_assert_eq!(again.size(), r.size());
        prop_assert_eq!(again.descriptor(), r.descriptor());
    }
}

fn rule_on(ring: &str, terms: &[(i64, u32)]) -> LocalRule {
    let r = Ring::parse(ring).unwrap();
    let t: Vec<(Coord, u32)> = terms.iter().map(|(h, c)| (Coord::from_slice(&[*h]), *c)).collect();
    LocalRule::new(ModuleSpec::scalar(r), (1, 0), t).unwrap()
}

fn small_rule(q: u32) -> impl Strategy<Value = Vec<(i64, u32)>> {
    proptest::collection::btree_map(-2i64..=2, 1..q, 1..4).prop_map(|m| m.into_iter().collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Composition of rules corresponds to multiplication of their polynomials.
    #[test]
    fn apply_is_a_ring_action(f in small_rule(4), g in small_rule(4), seed in any::<u64>()) {
        let f = rule_on("zmod:4", &f).to_poly();
        let g = rule_on("zmod:4", &g).to_poly();
        let w = WindowSpec::at_zero((1, 0), &[16]).unwrap();
        let c = WindowConfig::random(w, ModuleSpec::scalar(f.ring().clone()), Mode::Torus, &mut ChaCha8Rng::seed_from_u64(seed));
        let lhs = f.mul(&g).unwrap().apply(&c).unwrap();
        let rhs = f.apply(&g.apply(&c).unwrap()).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn lucas_power_matches_repeated_multiplication(f in small_rule(3), t in 0u64..60) {
        let f = rule_on("zmod:3", &f).to_poly();
        prop_assert_eq!(f.pow_lucas(t), f.pow(t));
    }

    #[test]
    fn iterate_matches_power(f in small_rule(5), t in 0u64..40, seed in any::<u64>()) {
        let f = rule_on("zmod:5", &f).to_poly();
        let w = WindowSpec::at_zero((1, 0), &[20]).unwrap();
        let c = WindowConfig::random(w, ModuleSpec::scalar(f.ring().clone()), Mode::Torus, &mut ChaCha8Rng::seed_from_u64(seed));
        let mut naive = c.clone();
        for _ in 0..t {
            naive = f.apply(&naive).unwrap();
        }
        prop_assert_eq!(f.iterate(&c, t).unwrap(), naive);
    }

    /// Splitting into CRT components commutes with the rule.
    #[test]
    fn crt_split_commutes(f in small_rule(6), seed in any::<u64>()) {
        let rule = rule_on("zmod:6", &f);
        let d = CrtDecomposition::new(rule.ring()).unwrap();
        let w = WindowSpec::at_zero((1, 0), &[12]).unwrap();
        let c = WindowConfig::random(w, rule.module().clone(), Mode::Torus, &mut ChaCha8Rng::seed_from_u64(seed));
        let parts = split_config(&c, &d).unwrap();
        prop_assert_eq!(&merge_config(&parts, &d).unwrap(), &c);
        let image = rule.to_poly().apply(&c).unwrap();
        let polys = d.component_polys(&rule);
        let pieces: Vec<WindowConfig> = polys.iter().zip(&parts).map(|(p, x)| p.apply(x).unwrap()).collect();
        prop_assert_eq!(merge_config(&pieces, &d).unwrap(), image);
    }
}

const PSI: &str = "kernel ring=zmod:2 rank=1 dims=1,1 H=(-1,0):1;(0,0):1;(1,0):1;(0,1):1";

/// Translating a Haar measure by `c` multiplies each coefficient by `χ(c)`.
#[test]
fn coset_coefficients_are_translated_kernel_coefficients() {
    let s = KernelShiftSpec::parse(PSI).unwrap();
    let w = WindowSpec::at_zero((1, 1), &[4, 3]).unwrap();
    let kernel = MeasureHandle::kernel_haar_on(&s, &w, 0).unwrap();
    let c = coset_from_cocycle(&[0], &[1], &w, s.module(), Mode::Exact).unwrap();
    let coset = MeasureHandle::coset(&c, &s, 0).unwrap();
    for chi in CharacterSpec::all(&w, s.module(), 1 << 12).unwrap() {
        let a = fourier(&kernel, &chi, Budget::Exact).unwrap().value();
        let b = fourier(&coset, &chi, Budget::Exact).unwrap().value();
        let expect = chi.eval(&c).unwrap() * a;
        assert!((b - expect).norm() < 1e-9, "{}: {b} vs {expect}", chi.label());
    }
}

/// Sampled coefficients agree with exact ones within four standard errors.
#[test]
fn sampled_fourier_tracks_exact() {
    let m = ModuleSpec::scalar(Ring::zmod(3).unwrap());
    let w = WindowSpec::at_zero((1, 0), &[3]).unwrap();
    let probs = vec![Prob::new(1, 2), Prob::new(1, 3), Prob::new(1, 6)];
    for seed in 0..8 {
        let mu = MeasureHandle::bernoulli(&m, &w, Mode::Exact, probs.clone(), seed).unwrap();
        for chi in CharacterSpec::all(&w, &m, 27).unwrap() {
            let exact = fourier(&mu, &chi, Budget::Exact).unwrap();
            let est = fourier(&mu, &chi, Budget::Samples(20_000)).unwrap();
            let gap = (est.value() - exact.value()).norm();
            assert!(gap <= 4.0 * est.stderr * std::f64::consts::SQRT_2 + 1e-12, "seed {seed} {}: gap {gap}, stderr {}", chi.label(), est.stderr);
        }
    }
}

#[test]
fn monomial_shift_moves_values() {
    let r = Ring::zmod(5).unwrap();
    let w = WindowSpec::at_zero((1, 0), &[7]).unwrap();
    let c = WindowConfig::from_fn(w, ModuleSpec::scalar(r.clone()), Mode::Torus, |m| smallvec::smallvec![(m[0] % 5) as u32]).unwrap();
    let sigma = ShiftPolynomial::monomial(r, (1, 0), &[1], 1);
    let out = sigma.apply(&c).unwrap();
    for z in 0..7i64 {
        assert_eq!(out.get(&[z]).unwrap()[0], (((z + 1) % 7) % 5) as u32);
    }
}
