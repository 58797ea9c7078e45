use proptest::prelude::*;
use r2unet::autodiff::{ParamId, ParamStore, Tape};
use r2unet::model::{audit, count_parameters, load_checkpoint, save_checkpoint, Checkpoint, TrainMeta};
use r2unet::nn::{downsample, Block, BlockSpec, BlockVariant, Initializer, RclUnit, Shortcut, Upsample, WeightSharing};
use r2unet::tensor::kernels::{conv2d, ConvGeometry};
use r2unet::train::AdamState;
use r2unet::{Architecture, Error, FormatError, Model, ModelSpec, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn randn(shape: &[usize], seed: u64) -> Tensor<f64> {
    Tensor::randn(shape.to_vec(), 1.0, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn bits<T: r2unet::Scalar>(t: &Tensor<T>) -> Vec<u64> {
    t.data().iter().map(|v| v.as_f64().to_bits()).collect()
}

fn zero(store: &mut ParamStore<f64>, id: ParamId) {
    let shape = store.value(id).shape().to_vec();
    store.set_value(id, Tensor::zeros(shape)).unwrap();
}

fn run_unit(unit: &RclUnit, store: &ParamStore<f64>, x: &Tensor<f64>) -> Tensor<f64> {
    let mut tape = Tape::new();
    let vars = tape.bind(store).unwrap();
    let xv = tape.constant(x.clone()).unwrap();
    let y = unit.forward(&mut tape, &vars, xv).unwrap();
    tape.value(y).clone()
}

fn run_block(block: &Block, store: &ParamStore<f64>, x: &Tensor<f64>) -> (Tensor<f64>, Tensor<f64>) {
    let mut tape = Tape::new();
    let vars = tape.bind(store).unwrap();
    let xv = tape.constant(x.clone()).unwrap();
    let y = block.forward(&mut tape, &vars, xv).unwrap();
    let f = block.residual_branch(&mut tape, &vars, xv).unwrap();
    (tape.value(y).clone(), tape.value(f).clone())
}

fn relu(t: &Tensor<f64>) -> Tensor<f64> {
    t.map(|v| v.max(0.0))
}

#[test]
fn rcl_matches_hand_unrolled_recurrence() {
    for sharing in [WeightSharing::Shared, WeightSharing::Unshared] {
        let mut s = ParamStore::new();
        let unit = RclUnit::register(&mut s, &mut Initializer::new(3), "u", 2, 3, 3, sharing).unwrap();
        let x = randn(&[2, 2, 6, 6], 4);
        let g = ConvGeometry::new(1, 1).unwrap();
        let feed = conv2d(&x, s.value(unit.w_f), Some(s.value(unit.bias)), g).unwrap();
        let mut state = relu(&feed);
        for step in 1..=3 {
            let wr = match sharing {
                WeightSharing::Shared => unit.w_r[0],
                WeightSharing::Unshared => unit.w_r[step - 1],
            };
            let rec = conv2d(&state, s.value(wr), None, g).unwrap();
            state = relu(&feed.zip_map(&rec, "oracle", |a, b| a + b).unwrap());
        }
        assert_eq!(bits(&run_unit(&unit, &s, &x)), bits(&state));
    }
}

#[test]
fn rcl_with_zero_recurrent_kernel_is_plain_conv_unit() {
    let x = randn(&[1, 2, 5, 5], 7);
    let mut rec = ParamStore::new();
    let r = RclUnit::register(&mut rec, &mut Initializer::new(8), "u", 2, 3, 2, WeightSharing::Unshared).unwrap();
    for id in r.w_r.clone() {
        zero(&mut rec, id);
    }
    let mut plain = ParamStore::new();
    let p = RclUnit::register(&mut plain, &mut Initializer::new(99), "u", 2, 3, 0, WeightSharing::Shared).unwrap();
    plain.set_value(p.w_f, rec.value(r.w_f).clone()).unwrap();
    plain.set_value(p.bias, randn(&[3], 9)).unwrap();
    rec.set_value(r.bias, plain.value(p.bias).clone()).unwrap();
    assert_eq!(bits(&run_unit(&r, &rec, &x)), bits(&run_unit(&p, &plain, &x)));
}

#[test]
fn rcl_parameter_laws() {
    let shared = |t| RclUnit::param_count(16, 32, t, WeightSharing::Shared);
    assert_eq!(shared(2), shared(5));
    assert_eq!(shared(0), 9 * 16 * 32 + 32);
    for t in 1..6 {
        let d = RclUnit::param_count(16, 32, t + 1, WeightSharing::Unshared)
            - RclUnit::param_count(16, 32, t, WeightSharing::Unshared);
        assert_eq!(d, 9 * 32 * 32);
    }
}

fn block_spec(variant: BlockVariant, cin: usize, cout: usize, shortcut: Shortcut) -> BlockSpec {
    BlockSpec {
        variant,
        in_channels: cin,
        out_channels: cout,
        t: 2,
        sharing: WeightSharing::Shared,
        rcl_per_block: 2,
        shortcut,
    }
}

#[test]
fn rrcnn_with_zero_branch_is_identity() {
    let spec = block_spec(BlockVariant::RecurrentResidual, 3, 3, Shortcut::Identity);
    let mut s = ParamStore::new();
    let block = Block::register(&mut s, &mut Initializer::new(10), "b", spec).unwrap();
    let ids: Vec<_> = s.iter().map(|(id, _)| id).collect();
    for id in ids {
        zero(&mut s, id);
    }
    let x = randn(&[2, 3, 4, 4], 11);
    let (y, f) = run_block(&block, &s, &x);
    assert!(f.data().iter().all(|&v| v == 0.0));
    assert_eq!(bits(&y), bits(&x));
}

#[test]
fn residual_output_is_shortcut_plus_branch() {
    for shortcut in [Shortcut::Identity, Shortcut::Projection] {
        let spec = block_spec(BlockVariant::RecurrentResidual, 3, 3, shortcut);
        let mut s = ParamStore::new();
        let block = Block::register(&mut s, &mut Initializer::new(12), "b", spec).unwrap();
        let x = randn(&[1, 3, 4, 4], 13);
        let (y, f) = run_block(&block, &s, &x);
        let short = match &block.projection {
            Some(p) => conv2d(&x, s.value(p.weight), Some(s.value(p.bias)), ConvGeometry::new(1, 0).unwrap()).unwrap(),
            None => x.clone(),
        };
        let sum = short.zip_map(&f, "oracle", |a, b| a + b).unwrap();
        assert_eq!(bits(&y), bits(&sum));
    }
    // Non-residual variants are just the branch.
    let spec = block_spec(BlockVariant::Recurrent, 3, 4, Shortcut::Identity);
    let mut s = ParamStore::new();
    let block = Block::register(&mut s, &mut Initializer::new(14), "b", spec).unwrap();
    let (y, f) = run_block(&block, &s, &randn(&[1, 3, 4, 4], 15));
    assert_eq!(bits(&y), bits(&f));
}

#[test]
fn identity_shortcut_rejects_channel_change() {
    let spec = block_spec(BlockVariant::Residual, 2, 3, Shortcut::Identity);
    let e = Block::register(&mut ParamStore::<f64>::new(), &mut Initializer::new(0), "b", spec).unwrap_err();
    assert!(e.to_string().contains("identity shortcut"), "{e}");
}

#[test]
fn resample_shape_laws() {
    let mut tape = Tape::<f32>::new();
    let x = tape.constant(Tensor::zeros(vec![1, 16, 48, 48])).unwrap();
    let d = downsample(&mut tape, x).unwrap();
    assert_eq!(tape.value(d).shape(), &[1, 16, 24, 24]);

    let mut s = ParamStore::<f32>::new();
    let up = Upsample::register(&mut s, &mut Initializer::new(0), "up", 128, 64).unwrap();
    let mut tape = Tape::new();
    let vars = tape.bind(&s).unwrap();
    let x = tape.constant(Tensor::zeros(vec![1, 128, 8, 8])).unwrap();
    let y = up.forward(&mut tape, &vars, x).unwrap();
    assert_eq!(tape.value(y).shape(), &[1, 64, 16, 16]);
}

#[test]
fn degeneracy_chain_is_bit_exact() {
    let x = randn(&[2, 1, 8, 8], 20).cast::<f32>();
    for (recurrent, plain) in [(Architecture::RuNet, Architecture::UNet), (Architecture::R2uNet, Architecture::ResUNet)] {
        for seed in [0, 1, 77] {
            let a = Model::<f32>::build(ModelSpec::tiny(recurrent, 0), seed).unwrap();
            let b = Model::<f32>::build(ModelSpec::tiny(plain, 0), seed).unwrap();
            assert_eq!(a.params.checksum(), b.params.checksum());
            assert_eq!(bits(&a.predict(&x).unwrap()), bits(&b.predict(&x).unwrap()));
        }
    }
}

fn brute_force(spec: &ModelSpec) -> usize {
    let m = Model::<f32>::build(spec.clone(), 0).unwrap();
    m.params.iter().map(|(_, p)| p.value.len()).sum()
}

fn matrix() -> Vec<ModelSpec> {
    let mut out = Vec::new();
    for arch in Architecture::ALL {
        for t in [0, 2, 3] {
            for sharing in [WeightSharing::Shared, WeightSharing::Unshared] {
                out.push(ModelSpec::default().with_sharing(sharing));
                let last = out.last_mut().unwrap();
                last.arch = arch;
                last.t = t;
            }
        }
    }
    out
}

#[test]
fn counts_match_enumeration_over_matrix() {
    for spec in matrix() {
        let b = count_parameters(&spec).unwrap();
        assert_eq!(b.total, brute_force(&spec), "{spec:?}");
        assert_eq!(b.parts.iter().map(|p| p.1).sum::<usize>(), b.total);
    }
}

#[test]
fn shared_counts_are_t_invariant_and_unshared_grow_analytically() {
    for arch in [Architecture::RuNet, Architecture::R2uNet] {
        let at = |t, sharing| {
            let mut s = ModelSpec::default().with_sharing(sharing);
            s.arch = arch;
            s.t = t;
            count_parameters(&s).unwrap().total
        };
        assert_eq!(at(2, WeightSharing::Shared), at(3, WeightSharing::Shared));
        assert_eq!(at(2, WeightSharing::Shared), at(5, WeightSharing::Shared));
        let spec = ModelSpec {
            arch,
            ..ModelSpec::default()
        };
        let sum_sq: usize = spec
            .blocks()
            .iter()
            .map(|(_, b)| b.rcl_per_block * b.out_channels * b.out_channels)
            .sum();
        assert_eq!(at(3, WeightSharing::Unshared) - at(2, WeightSharing::Unshared), 9 * sum_sq);
    }
    for arch in [Architecture::UNet, Architecture::ResUNet] {
        let mut s = ModelSpec::default();
        s.arch = arch;
        let c0 = count_parameters(&s).unwrap().total;
        s.t = 3;
        s.sharing = WeightSharing::Unshared;
        assert_eq!(count_parameters(&s).unwrap().total, c0);
    }
}

#[test]
fn audit_lists_published_references() {
    let rows = audit(&ModelSpec::default()).unwrap();
    let text = r2unet::model::AuditTable(&rows).to_string();
    assert_eq!(rows.len(), 4);
    assert!(text.contains("0.845") && text.contains("1.037"), "{text}");
    assert!(rows.iter().all(|r| (r.delta_m() - (r.count as f64 / 1e6 - r.reference_m)).abs() < 1e-12));
}

#[test]
fn probabilities_in_open_unit_interval() {
    let m = Model::<f32>::build(ModelSpec::default(), 5).unwrap();
    let y = m.predict(&randn(&[1, 1, 64, 64], 6).cast()).unwrap();
    assert_eq!(y.shape(), &[1, 1, 64, 64]);
    assert!(y.data().iter().all(|&p| p > 0.0 && p < 1.0));
}

#[test]
fn indivisible_and_wrong_channel_inputs_rejected() {
    let m = Model::<f32>::build(ModelSpec::default(), 0).unwrap();
    match m.predict(&Tensor::zeros(vec![1, 1, 36, 32])) {
        Err(Error::Indivisible { divisor: 8, .. }) => {}
        other => panic!("{other:?}"),
    }
    let e = m.predict(&Tensor::zeros(vec![1, 3, 32, 32])).unwrap_err();
    assert!(e.to_string().contains("channels"), "{e}");
}

#[test]
fn build_is_seed_deterministic() {
    let a = Model::<f32>::build(ModelSpec::default(), 42).unwrap();
    let b = Model::<f32>::build(ModelSpec::default(), 42).unwrap();
    let c = Model::<f32>::build(ModelSpec::default(), 43).unwrap();
    assert_eq!(a.params.checksum(), b.params.checksum());
    assert_ne!(a.params.checksum(), c.params.checksum());
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    let m = Model::<f32>::build(ModelSpec::tiny(Architecture::R2uNet, 2), 3).unwrap();
    let adam = AdamState::new(&m.params);
    let meta = TrainMeta { epoch: 7, seed: 3 };
    save_checkpoint(&path, &m, &meta, Some(&adam)).unwrap();
    let back = load_checkpoint::<f32>(&path).unwrap();
    assert_eq!(back.meta, meta);
    assert_eq!(back.model.spec(), m.spec());
    assert!(back.adam.is_some());
    let x = randn(&[1, 1, 16, 16], 4).cast::<f32>();
    assert_eq!(bits(&back.model.predict(&x).unwrap()), bits(&m.predict(&x).unwrap()));
    // Re-encoding is byte-stable.
    assert_eq!(back.to_bytes(), std::fs::read(&path).unwrap());
}

#[test]
fn checkpoint_reports_spec_metadata() {
    let m = Model::<f64>::build(ModelSpec::new(Architecture::UNet, vec![4, 8, 16], 3), 0).unwrap();
    let ck = Checkpoint {
        model: m,
        meta: TrainMeta::default(),
        adam: None,
    };
    let back = Checkpoint::<f64>::from_bytes(&ck.to_bytes()).unwrap();
    let spec = back.model.spec();
    assert_eq!(spec.arch.as_str(), "unet");
    assert_eq!(spec.schedule, vec![4, 8, 16]);
    assert_eq!(spec.t, 3);
}

#[test]
fn truncated_checkpoint_is_an_error() {
    let m = Model::<f32>::build(ModelSpec::tiny(Architecture::UNet, 0), 0).unwrap();
    let bytes = Checkpoint {
        model: m,
        meta: TrainMeta::default(),
        adam: None,
    }
    .to_bytes();
    for cut in [bytes.len() - 1, bytes.len() / 2, 40] {
        match Checkpoint::<f32>::from_bytes(&bytes[..cut]) {
            Err(Error::Format(FormatError::Truncated { .. })) => {}
            Err(e) => assert!(e.to_string().contains("truncated"), "cut {cut}: {e}"),
            Ok(_) => panic!("cut {cut} decoded"),
        }
    }
    let e = Checkpoint::<f32>::from_bytes(b"NOTACKPT").unwrap_err();
    assert!(matches!(e, Error::Format(_)), "{e}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn output_extents_equal_input_extents(arch_i in 0usize..4, hk in 1usize..4, wk in 1usize..4, seed in 0u64..100) {
        let arch = Architecture::ALL[arch_i];
        let m = Model::<f32>::build(ModelSpec::new(arch, vec![2, 3, 4], 1), seed).unwrap();
        let x = randn(&[1, 1, 4 * hk, 4 * wk], seed).cast::<f32>();
        let y = m.predict(&x).unwrap();
        prop_assert_eq!(y.shape(), x.shape());
    }
}

#[test]
fn oversized_declared_model_rejected_without_allocation() {
    use r2unet::container::Container;
    use r2unet::model::CHECKPOINT_MAGIC;
    for schedule in ["60000,60000", "70000"] {
        let mut c = Container::new();
        c.header.insert("model.schedule".into(), schedule.into());
        c.header.insert("meta.kind".into(), "checkpoint".into());
        let e = Checkpoint::<f32>::from_bytes(&c.encode(CHECKPOINT_MAGIC)).unwrap_err();
        assert!(matches!(e, Error::Format(_) | Error::InvalidArgument(_)), "{e}");
    }
}
