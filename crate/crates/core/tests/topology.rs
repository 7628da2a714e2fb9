use flash_core::arch::{realize_layers, sample_uniform, ArchConfig, LayerGeometry, SpaceSpec};
use flash_core::topology::{
    count_kernels_oracle, nn_degree, nn_degree_unchecked, oracle_degree, Exact,
};
use proptest::prelude::*;

fn oracle(c: &ArchConfig, spec: &SpaceSpec) -> Exact {
    let layers = realize_layers(c, spec, &LayerGeometry::default()).unwrap();
    oracle_degree(&count_kernels_oracle(&layers))
}

#[test]
fn degree_matches_kernel_count_on_samples() {
    let spec = SpaceSpec::default();
    for c in sample_uniform(&spec, 11, 300).unwrap() {
        assert_eq!(
            nn_degree(&c, &spec).unwrap().exact,
            oracle(&c, &spec),
            "{c}"
        );
    }
}

#[test]
fn hand_counted_cell() {
    // One cell of width 2, depth 4, budget 3: concat counts 0, 0, 2, 3;
    // 4 layers of 2x2 short-range kernels plus 5x2 skip kernels over 8 nodes.
    let spec = SpaceSpec {
        w_m_min: 1,
        w_m_max: 1,
        d_c_min: 4,
        d_c_max: 4,
        n_c: 1,
        n_c_max: None,
        base_widths: vec![2],
        t1_min: 0,
        coupling: 2,
    };
    let c = ArchConfig {
        w_m: 1,
        n_c: 1,
        d_c: 4,
        t: vec![3],
    };
    let r = nn_degree(&c, &spec).unwrap();
    assert_eq!(r.exact, Exact::new(4 * 2 * 2 + 5 * 2, 8));
    assert_eq!(r.exact, oracle(&c, &spec));
    assert_eq!(r.total_skip_connections(), 10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn non_decreasing_in_each_budget(seed in any::<u64>(), cell in 0usize..3, bump in 1u32..40) {
        let spec = SpaceSpec::default();
        let c = &sample_uniform(&spec, seed, 1).unwrap()[0];
        let mut up = c.clone();
        up.t[cell] += bump;
        let lo = nn_degree_unchecked(c, &spec).unwrap().exact;
        let hi = nn_degree_unchecked(&up, &spec).unwrap().exact;
        prop_assert!(hi >= lo);
    }

    #[test]
    fn strictly_increasing_in_width(seed in any::<u64>()) {
        let spec = SpaceSpec::default();
        let c = &sample_uniform(&spec, seed, 1).unwrap()[0];
        let mut wider = c.clone();
        wider.w_m += 1;
        let a = nn_degree_unchecked(c, &spec).unwrap().exact;
        let b = nn_degree_unchecked(&wider, &spec).unwrap().exact;
        prop_assert!(b > a);
    }

    #[test]
    fn skip_term_bounds(seed in any::<u64>()) {
        let spec = SpaceSpec::default();
        let c = &sample_uniform(&spec, seed, 1).unwrap()[0];
        let r = nn_degree(c, &spec).unwrap();
        let d = c.d_c as u64;
        for ((&w_c, &t_c), g_r) in spec.widths(c.w_m, c.n_c).iter().zip(&c.t).zip(&r.exact_random) {
            let full: u64 = (2..d).map(|i| (i - 1) * w_c as u64).sum();
            prop_assert!(*g_r <= Exact::new(full, d));
            prop_assert!(*g_r <= Exact::new((d - 2) * t_c as u64, d));
        }
    }

    #[test]
    fn scales_with_width_when_unclamped(w in 1u32..=3, k in 2u32..=3, d in 5u32..=12, t1 in 0u32..=8) {
        // Budgets at or below the cell width never clamp.
        let spec = SpaceSpec::default();
        let base = ArchConfig::new(w, d, vec![t1.min(16 * w), 2 * t1.min(16 * w), 4 * t1.min(16 * w)]);
        let scaled = ArchConfig::new(w * k, d, base.t.iter().map(|t| t * k).collect());
        let a = nn_degree_unchecked(&base, &spec).unwrap().exact;
        let b = nn_degree_unchecked(&scaled, &spec).unwrap().exact;
        prop_assert_eq!(b, a * Exact::from_integer(k as u64));
    }
}
