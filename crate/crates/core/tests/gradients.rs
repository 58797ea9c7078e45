use r2unet::autodiff::{gradcheck, GradcheckOptions, GradcheckReport, ParamStore, Tape, Var};
use r2unet::nn::{Block, BlockSpec, BlockVariant, Initializer, RclUnit, Shortcut, WeightSharing};
use r2unet::{Architecture, Model, ModelSpec, Result, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-4;

fn randn(shape: &[usize], seed: u64) -> Tensor<f64> {
    Tensor::randn(shape.to_vec(), 1.0, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn opts() -> GradcheckOptions {
    GradcheckOptions {
        step: 1e-5,
        tolerance: TOL,
        ..Default::default()
    }
}

/// Contracts `v` with fixed random weights so every output element
/// contributes a distinct sensitivity.
fn project(tape: &mut Tape<f64>, v: Var, seed: u64) -> Result<Var> {
    let shape = tape.value(v).shape().to_vec();
    let w = tape.constant(randn(&shape, seed))?;
    let p = tape.mul(v, w)?;
    tape.sum(p)
}

fn check(store: &mut ParamStore<f64>, f: impl Fn(&mut Tape<f64>, &[Var]) -> Result<Var>) -> GradcheckReport {
    let report = gradcheck(
        store,
        |tape, params| {
            let vars = tape.bind(params)?;
            f(tape, &vars)
        },
        &opts(),
    )
    .unwrap();
    assert!(report.passed(), "\n{report}");
    report
}

#[test]
fn conv2d_input_weight_bias() {
    for (stride, pad) in [(1, 1), (2, 0), (1, 0)] {
        let mut s = ParamStore::new();
        s.register("x", randn(&[2, 3, 6, 6], 1)).unwrap();
        s.register("w", randn(&[4, 3, 3, 3], 2)).unwrap();
        s.register("b", randn(&[4], 3)).unwrap();
        check(&mut s, |t, v| {
            let y = t.conv2d(v[0], v[1], Some(v[2]), stride, pad)?;
            project(t, y, 4)
        });
    }
}

#[test]
fn conv2d_transpose_input_weight_bias() {
    let mut s = ParamStore::new();
    s.register("x", randn(&[2, 3, 3, 3], 5)).unwrap();
    s.register("w", randn(&[3, 2, 2, 2], 6)).unwrap();
    s.register("b", randn(&[2], 7)).unwrap();
    check(&mut s, |t, v| {
        let y = t.conv2d_transpose(v[0], v[1], Some(v[2]), 2)?;
        project(t, y, 8)
    });
}

#[test]
fn maxpool2_input() {
    let mut s = ParamStore::new();
    s.register("x", randn(&[2, 2, 6, 4], 9)).unwrap();
    check(&mut s, |t, v| {
        let y = t.maxpool2(v[0])?;
        project(t, y, 10)
    });
}

#[test]
fn relu_and_sigmoid() {
    let mut s = ParamStore::new();
    s.register("x", randn(&[3, 5], 11)).unwrap();
    check(&mut s, |t, v| {
        let y = t.relu(v[0])?;
        project(t, y, 12)
    });
    check(&mut s, |t, v| {
        let y = t.sigmoid(v[0])?;
        project(t, y, 13)
    });
}

#[test]
fn concat_channels_both_operands() {
    let mut s = ParamStore::new();
    s.register("a", randn(&[2, 2, 3, 3], 14)).unwrap();
    s.register("b", randn(&[2, 3, 3, 3], 15)).unwrap();
    check(&mut s, |t, v| {
        let y = t.concat_channels(v[0], v[1])?;
        project(t, y, 16)
    });
}

#[test]
fn add_and_mul() {
    let mut s = ParamStore::new();
    s.register("a", randn(&[2, 3], 17)).unwrap();
    s.register("b", randn(&[2, 3], 18)).unwrap();
    check(&mut s, |t, v| {
        let y = t.add(v[0], v[1])?;
        let z = t.mul(y, v[1])?;
        project(t, z, 19)
    });
}

#[test]
fn bce_loss_through_sigmoid() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let target = Tensor::from_fn(vec![2, 1, 4, 4], |_| rng.random_bool(0.4) as u8 as f64);
    let mut s = ParamStore::new();
    s.register("logits", randn(&[2, 1, 4, 4], 21)).unwrap();
    check(&mut s, |t, v| {
        let p = t.sigmoid(v[0])?;
        t.bce_loss(p, &target)
    });
}

#[test]
fn bce_loss_direct_probabilities() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let target = Tensor::from_fn(vec![1, 1, 3, 3], |_| rng.random_bool(0.5) as u8 as f64);
    let p = Tensor::from_fn(vec![1, 1, 3, 3], |_| rng.random_range(0.1..0.9));
    let mut s = ParamStore::new();
    s.register("p", p).unwrap();
    check(&mut s, |t, v| t.bce_loss(v[0], &target));
}

#[test]
fn mse_loss() {
    let target = randn(&[1, 1, 3, 3], 23);
    let mut s = ParamStore::new();
    s.register("p", randn(&[1, 1, 3, 3], 24)).unwrap();
    check(&mut s, |t, v| t.mse(v[0], &target));
}

#[test]
fn rcl_unit_all_steps_and_sharing() {
    for t_steps in [0, 2, 3] {
        for sharing in [WeightSharing::Shared, WeightSharing::Unshared] {
            let mut s = ParamStore::new();
            let mut init = Initializer::new(30 + t_steps as u64);
            let unit = RclUnit::register(&mut s, &mut init, "rcl", 2, 3, t_steps, sharing).unwrap();
            let x = s.register("x", randn(&[1, 2, 5, 5], 31)).unwrap();
            let r = check(&mut s, |t, v| {
                let y = unit.forward(t, v, v[x.index()])?;
                project(t, y, 32)
            });
            let expected = 3 + unit.w_r.len();
            assert_eq!(r.params.len(), expected, "t={t_steps} {sharing:?}");
        }
    }
}

#[test]
fn rrcnn_block_identity_and_projection() {
    for (cin, shortcut) in [(3, Shortcut::Identity), (2, Shortcut::Projection)] {
        let spec = BlockSpec {
            variant: BlockVariant::RecurrentResidual,
            in_channels: cin,
            out_channels: 3,
            t: 2,
            sharing: WeightSharing::Shared,
            rcl_per_block: 2,
            shortcut,
        };
        let mut s = ParamStore::new();
        let block = Block::register(&mut s, &mut Initializer::new(40), "blk", spec).unwrap();
        let x = s.register("x", randn(&[1, cin, 4, 4], 41)).unwrap();
        check(&mut s, |t, v| {
            let y = block.forward(t, v, v[x.index()])?;
            project(t, y, 42)
        });
    }
}

#[test]
fn tiny_models_all_variants() {
    let start = std::time::Instant::now();
    for arch in Architecture::ALL {
        let model = Model::<f64>::build(ModelSpec::tiny(arch, 2), 50).unwrap();
        let input = randn(&[1, 1, 8, 8], 51);
        let mut rng = ChaCha8Rng::seed_from_u64(52);
        let target = Tensor::from_fn(vec![1, 1, 8, 8], |_| rng.random_bool(0.5) as u8 as f64);
        let mut s = model.params.clone();
        check(&mut s, |t, v| {
            let x = t.constant(input.clone())?;
            let y = model.forward(t, v, x)?;
            t.bce_loss(y, &target)
        });
    }
    assert!(start.elapsed().as_secs() < 120);
}
