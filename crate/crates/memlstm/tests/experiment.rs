use memlstm::pipeline::Experiment;
use memlstm::RunConfig;
use memlstm_core::{train, Dims, TrainConfig};

fn median(v: &[f64]) -> f64 {
    let mut v = v.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[test]
fn loss_trends_down_on_airline_split() {
    let exp = Experiment::prepare(&RunConfig::default()).unwrap();
    let dims = Dims::new(1, 4).unwrap();
    let mut improving = 0;
    for seed in 0..5 {
        let cfg = TrainConfig {
            seed,
            ..TrainConfig::default()
        };
        let o = train(dims, &exp.train, &cfg).unwrap();
        let h = &o.loss_history;
        assert_eq!(h.len(), 100);
        assert!(h[99] < h[0], "seed {seed}: {} -> {}", h[0], h[99]);
        if median(&h[90..]) < median(&h[..10]) {
            improving += 1;
        }
        let in_range = |v: &f64| (-1.0..=1.0).contains(v);
        assert!(o.params.values().all(in_range));
        assert!(o.out.w_out.iter().all(in_range) && in_range(&o.out.b_out));
    }
    assert!(improving >= 4, "only {improving} of 5 seeds improved");
}

#[test]
fn normalizer_maps_series_extremes_exactly() {
    let exp = Experiment::prepare(&RunConfig::default()).unwrap();
    assert_eq!(exp.normalizer.min(), 104.0);
    assert_eq!(exp.normalizer.max(), 622.0);
    assert_eq!(exp.normalizer.apply(104.0), 0.0);
    assert_eq!(exp.normalizer.apply(622.0), 1.0);
    assert_eq!(exp.windows.len(), 143);
}
