use ndarray::Array2;
use proptest::prelude::*;

use occufuse::cf::{score_cf, CfConfig};
use occufuse::fusion::{fuse, FusionWeights};
use occufuse::metrics::rank_target;
use occufuse::rl::{family_bias, score_rl, train_bandit, Family, FamilyTaxonomy, RlConfig};
use occufuse::topsis::{closeness, entropy_weights, CriterionMatrix, TopsisNormalization};
use occufuse::transitions::TransitionModel;

const N: usize = 24;

/// Items 0..4 share a family; the rest are spread over the other five.
fn taxonomy() -> FamilyTaxonomy {
    FamilyTaxonomy::new(
        (0..N)
            .map(|i| {
                if i < 4 {
                    Family::DigitalExperience
                } else {
                    let others = [
                        Family::SoftwareEngineering,
                        Family::InfrastructureSecurity,
                        Family::DataAi,
                        Family::HardwareAutomation,
                        Family::TechnologyManagement,
                    ];
                    others[i % 5]
                }
            })
            .collect(),
    )
}

/// A same-family target that the collaborative branch buries: the user's last
/// item only ever led to other families at item level, while the family as a
/// whole is sticky.
#[test]
fn bandit_rescues_a_same_family_target() {
    let mut corpus: Vec<Vec<usize>> = (4..N).map(|k| vec![0, k]).collect();
    for _ in 0..30 {
        corpus.push(vec![2, 3, 2]);
    }
    for _ in 0..12 {
        corpus.push(vec![1, 1, 1, 1]);
    }
    let tax = taxonomy();
    let model = TransitionModel::<f64>::build(N, &corpus).unwrap();
    let cfg = RlConfig::<f64>::default();
    let table = train_bandit(&corpus, &tax, &cfg).unwrap();

    let history = [2, 3, 0];
    let target = 1;
    let cf = score_cf(&history, &model, &CfConfig::default()).unwrap();
    let bias = family_bias(&history, &tax, cfg.decay).unwrap();
    let rl = score_rl(&history, &table, &bias, model.popularity(), &tax, &cfg).unwrap();
    let flat = vec![0.0; N];
    let full = fuse(&cf, &rl, &flat, &FusionWeights::new(0.3, 0.5, 0.2).unwrap()).unwrap();

    let cf_rank = rank_target(&cf, target).unwrap();
    let rl_rank = rank_target(&rl, target).unwrap();
    let full_rank = rank_target(&full, target).unwrap();
    assert!(cf_rank >= 21, "cf rank {cf_rank}");
    assert_eq!(rl_rank, 2);
    assert!(full_rank <= 3, "full rank {full_rank}");
}

fn unit_vec(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..=1.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fusion_is_convex(
        a in unit_vec(12),
        b in unit_vec(12),
        c in unit_vec(12),
        cf in 0.0f64..=0.7,
        rl in 0.0f64..=0.3,
    ) {
        let w = FusionWeights::with_remainder(cf, rl).unwrap();
        let f = fuse(&a, &b, &c, &w).unwrap();
        for i in 0..12 {
            let lo = a[i].min(b[i]).min(c[i]);
            let hi = a[i].max(b[i]).max(c[i]);
            prop_assert!(f[i] >= lo - 1e-12 && f[i] <= hi + 1e-12);
        }
    }

    #[test]
    fn cf_scores_are_unit_range(
        corpus in prop::collection::vec(prop::collection::vec(0usize..8, 2..6), 1..20),
        prefix in prop::collection::vec(0usize..8, 1..6),
        beta in 0.0f64..=1.0,
    ) {
        let model = TransitionModel::<f64>::build(8, &corpus).unwrap();
        let s = score_cf(&prefix, &model, &CfConfig { beta, ..CfConfig::default() }).unwrap();
        prop_assert_eq!(s.len(), 8);
        prop_assert!(s.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn closeness_is_unit_range_and_dominance_wins(
        rows in prop::collection::vec(prop::collection::vec(0.0f64..10.0, 6), 2..15),
    ) {
        let n = rows.len();
        let mut x = Array2::<f64>::zeros((n + 1, 6));
        for (i, r) in rows.iter().enumerate() {
            for j in 0..6 {
                x[[i, j]] = r[j];
            }
        }
        // an extra row at least as good as every other on every criterion
        for j in 0..6 {
            x[[n, j]] = rows.iter().map(|r| r[j]).fold(0.0, f64::max) + 1.0;
        }
        let m = CriterionMatrix::new(x).unwrap();
        let w = entropy_weights(&m);
        let c = closeness(&m, &w, TopsisNormalization::Vector);
        prop_assert!(c.iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert!(c[..n].iter().all(|&v| v <= c[n]));
    }
}
