use std::path::PathBuf;

use oqs_bench::config::{
    Axis, Fixed, Grid, Method, Metric, Reference, Scale, ScanConfig, TauRule, PRESETS,
};
use proptest::prelude::*;

fn axis() -> impl Strategy<Value = Axis> {
    (1e-3f64..10.0, 1e-3f64..10.0, 1usize..40, prop::bool::ANY).prop_map(|(a, w, n, log)| Axis {
        min: a,
        max: a + w,
        n,
        scale: if log { Scale::Log } else { Scale::Linear },
    })
}

fn config() -> impl Strategy<Value = ScanConfig> {
    let method = prop::sample::select(vec![
        Method::Exact,
        Method::Redfield,
        Method::RedfieldTi,
        Method::Rwa,
        Method::Nr,
    ]);
    let metric = prop::sample::select(vec![
        Metric::AvgTraceDist,
        Metric::SteadyTraceDist,
        Metric::SteadyTraceDistOverGamma,
        Metric::OdDistOverGamma,
    ]);
    let tau = prop_oneof![
        (0.1f64..10.0).prop_map(TauRule::InverseGamma),
        (0.1f64..100.0).prop_map(TauRule::Fixed),
    ];
    (
        method,
        metric,
        axis(),
        axis(),
        0.01f64..20.0,
        2usize..80,
        tau,
        prop::bool::ANY,
        "[a-z]{1,8}",
    )
        .prop_map(
            |(method, metric, gamma, beta, cutoff, dim, tau_r_rule, plot, name)| ScanConfig {
                method,
                reference: Reference::Exact,
                metric,
                output: PathBuf::from(format!("{name}.csv")),
                plot,
                grid: Grid { gamma, beta },
                fixed: Fixed {
                    cutoff,
                    dim,
                    tau_r_rule,
                },
            },
        )
}

proptest! {
    #[test]
    fn parse_serialize_parse_is_identity(cfg in config()) {
        let text = cfg.to_toml();
        let parsed = ScanConfig::parse(&text).unwrap();
        prop_assert_eq!(&parsed, &cfg);
        prop_assert_eq!(ScanConfig::parse(&parsed.to_toml()).unwrap(), parsed);
    }

    #[test]
    fn axes_hit_their_endpoints(a in axis()) {
        let v = a.values();
        prop_assert_eq!(v.len(), a.n);
        prop_assert_eq!(v[0], a.min);
        if a.n > 1 {
            prop_assert!((v[a.n - 1] - a.max).abs() <= 1e-12 * a.max);
            prop_assert!(v.windows(2).all(|w| w[1] > w[0]));
        }
    }
}

#[test]
fn presets_round_trip() {
    for name in PRESETS {
        let cfg = ScanConfig::preset(name).unwrap();
        assert_eq!(ScanConfig::parse(&cfg.to_toml()).unwrap(), cfg);
    }
}
