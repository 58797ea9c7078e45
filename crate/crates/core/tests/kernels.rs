use proptest::prelude::*;
use r2unet::autodiff::{ParamStore, Tape};
use r2unet::tensor::kernels::{conv2d, conv2d_transpose, maxpool2, ConvGeometry};
use r2unet::Tensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn randn(shape: &[usize], seed: u64) -> Tensor<f64> {
    Tensor::randn(shape.to_vec(), 1.0, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Seven nested loops, straight from the definition.
fn naive_conv(x: &Tensor<f64>, w: &Tensor<f64>, b: &[f64], stride: usize, pad: usize) -> Tensor<f64> {
    let (n, cin, h, wd) = x.dims4("oracle").unwrap();
    let (cout, _, kh, kw) = w.dims4("oracle").unwrap();
    let oh = (h + 2 * pad - kh) / stride + 1;
    let ow = (wd + 2 * pad - kw) / stride + 1;
    let mut out = Tensor::zeros(vec![n, cout, oh, ow]);
    for bn in 0..n {
        for co in 0..cout {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = b[co];
                    for ci in 0..cin {
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let iy = (oy * stride + ky) as isize - pad as isize;
                                let ix = (ox * stride + kx) as isize - pad as isize;
                                if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < wd {
                                    acc += w.at4(co, ci, ky, kx) * x.at4(bn, ci, iy as usize, ix as usize);
                                }
                            }
                        }
                    }
                    out.data_mut()[((bn * cout + co) * oh + oy) * ow + ox] = acc;
                }
            }
        }
    }
    out
}

fn max_abs_diff(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn conv_matches_direct_oracle() {
    let x = randn(&[2, 3, 8, 8], 1);
    let w = randn(&[4, 3, 3, 3], 2);
    let b = randn(&[4], 3);
    for (stride, pad) in [(1, 1), (1, 0), (2, 1), (2, 0)] {
        let got = conv2d(&x, &w, Some(&b), ConvGeometry::new(stride, pad).unwrap()).unwrap();
        let want = naive_conv(&x, &w, b.data(), stride, pad);
        assert!(max_abs_diff(&got, &want) < 1e-6, "stride {stride} pad {pad}");
    }
}

#[test]
fn conv_counts_covered_ones() {
    let x = Tensor::<f64>::full(vec![1, 1, 3, 3], 1.0);
    let w = Tensor::<f64>::full(vec![1, 1, 3, 3], 1.0);
    let y = conv2d(&x, &w, None, ConvGeometry::new(1, 1).unwrap()).unwrap();
    assert_eq!(y.data(), &[4.0, 6.0, 4.0, 6.0, 9.0, 6.0, 4.0, 6.0, 4.0]);
}

#[test]
fn conv_rejects_channel_mismatch() {
    let e = conv2d(
        &randn(&[1, 2, 4, 4], 0),
        &randn(&[1, 3, 3, 3], 0),
        None,
        ConvGeometry::new(1, 1).unwrap(),
    )
    .unwrap_err();
    assert!(e.to_string().contains("channels"), "{e}");
}

#[test]
fn transpose_equals_explicit_adjoint_matrix() {
    // conv2d with stride 2, 2x2 kernel maps [1, co, 4, 4] -> [1, ci, 2, 2];
    // the transposed convolution with the same weights is its matrix transpose.
    let (ci, co) = (3, 2);
    let w = randn(&[ci, co, 2, 2], 9);
    let geom = ConvGeometry::new(2, 0).unwrap();
    let n_in = co * 16;
    let n_out = ci * 4;
    let mut m = vec![0.0; n_out * n_in];
    for j in 0..n_in {
        let e = Tensor::from_fn(vec![1, co, 4, 4], |i| if i == j { 1.0 } else { 0.0 });
        let col = conv2d(&e, &w, None, geom).unwrap();
        for (i, v) in col.data().iter().enumerate() {
            m[i * n_in + j] = *v;
        }
    }
    let y = randn(&[1, ci, 2, 2], 10);
    let got = conv2d_transpose(&y, &w, None, 2).unwrap();
    let want = Tensor::from_fn(vec![1, co, 4, 4], |j| (0..n_out).map(|i| m[i * n_in + j] * y.data()[i]).sum());
    assert!(max_abs_diff(&got, &want) < 1e-12);
}

#[test]
fn transpose_single_scatter_and_shape() {
    let one = Tensor::<f64>::full(vec![1, 1, 1, 1], 1.0);
    let w = Tensor::<f64>::full(vec![1, 1, 2, 2], 1.0);
    assert_eq!(conv2d_transpose(&one, &w, None, 2).unwrap().data(), &[1.0; 4]);
    let y = conv2d_transpose(&randn(&[1, 1, 2, 2], 0), &w, None, 2).unwrap();
    assert_eq!(y.shape(), &[1, 1, 4, 4]);
    assert!(conv2d_transpose(&one, &randn(&[1, 1, 3, 3], 0), None, 2).is_err());
}

/// Exhaustive scan of each window.
fn scan_pool(x: &Tensor<f64>) -> Tensor<f64> {
    let (n, c, h, w) = x.dims4("oracle").unwrap();
    Tensor::from_fn(vec![n, c, h / 2, w / 2], |i| {
        let (ox, rest) = (i % (w / 2), i / (w / 2));
        let (oy, p) = (rest % (h / 2), rest / (h / 2));
        let (b, ch) = (p / c, p % c);
        let mut m = f64::NEG_INFINITY;
        for dy in 0..2 {
            for dx in 0..2 {
                m = m.max(x.at4(b, ch, 2 * oy + dy, 2 * ox + dx));
            }
        }
        m
    })
}

#[test]
fn maxpool_matches_window_scan() {
    let x = randn(&[1, 2, 6, 6], 4);
    assert_eq!(maxpool2(&x).unwrap().0, scan_pool(&x));
    let w = Tensor::new(vec![1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    assert_eq!(maxpool2(&w).unwrap().0.data(), &[4.0]);
    let e = maxpool2(&randn(&[1, 1, 4, 5], 0)).unwrap_err();
    assert!(e.to_string().contains("width"), "{e}");
}

#[test]
fn constant_pool_routes_one_gradient_per_window() {
    let mut store = ParamStore::new();
    let id = store.register("x", Tensor::<f64>::full(vec![1, 1, 4, 4], 2.5)).unwrap();
    let mut tape = Tape::new();
    let x = tape.param(&store, id).unwrap();
    let y = tape.maxpool2(x).unwrap();
    assert!(tape.value(y).data().iter().all(|&v| v == 2.5));
    let s = tape.sum(y).unwrap();
    tape.backward(s, &mut store).unwrap();
    #[rustfmt::skip]
    let want = [1., 0., 1., 0.,
                0., 0., 0., 0.,
                1., 0., 1., 0.,
                0., 0., 0., 0.];
    assert_eq!(store.grad(id).data(), &want);
}

#[test]
fn backward_linear_form_and_dead_relu() {
    let mut store = ParamStore::new();
    let w = store.register("w", randn(&[1, 2, 3, 3], 5)).unwrap();
    let xv = randn(&[1, 2, 3, 3], 6);
    let mut tape = Tape::new();
    let (wv, c) = (tape.param(&store, w).unwrap(), tape.constant(xv.clone()).unwrap());
    let prod = tape.mul(wv, c).unwrap();
    let loss = tape.sum(prod).unwrap();
    tape.backward(loss, &mut store).unwrap();
    assert_eq!(store.grad(w), &xv);

    let mut store = ParamStore::new();
    let w = store.register("w", Tensor::<f64>::full(vec![4], -0.3)).unwrap();
    let mut tape = Tape::new();
    let wv = tape.param(&store, w).unwrap();
    let r = tape.relu(wv).unwrap();
    let loss = tape.sum(r).unwrap();
    tape.backward(loss, &mut store).unwrap();
    assert!(store.grad(w).data().iter().all(|&g| g == 0.0));
}

#[test]
fn pointwise_values() {
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::<f64>::new(vec![3], vec![-1.5, 2.0, 0.0]).unwrap()).unwrap();
    let r = tape.relu(x).unwrap();
    assert_eq!(tape.value(r).data(), &[0.0, 2.0, 0.0]);
    let s = tape.sigmoid(x).unwrap();
    assert_eq!(tape.value(s).data()[2], 0.5);
    let a = tape.constant(Tensor::<f64>::zeros(vec![1, 64, 2, 2])).unwrap();
    let c = tape.concat_channels(a, a).unwrap();
    assert_eq!(tape.value(c).shape(), &[1, 128, 2, 2]);
}

#[test]
fn non_scalar_loss_rejected_and_detached_flagged() {
    let mut store = ParamStore::new();
    let w = store.register("w", randn(&[2], 1)).unwrap();
    let mut tape = Tape::new();
    let wv = tape.param(&store, w).unwrap();
    assert!(tape.backward(wv, &mut store).is_err());
    let c = tape.constant(randn(&[2], 2)).unwrap();
    let s = tape.sum(c).unwrap();
    let report = tape.backward(s, &mut store).unwrap();
    assert!(report.detached);
    assert!(store.grad(w).data().iter().all(|&g| g == 0.0));
}

#[test]
fn non_finite_input_rejected() {
    let mut tape = Tape::<f64>::new();
    let bad = Tensor::new(vec![1, 1, 2, 2], vec![0.0, f64::NAN, 1.0, 2.0]).unwrap();
    assert!(tape.constant(bad).is_err());
}

fn shape4() -> impl Strategy<Value = (usize, usize, usize, usize)> {
    (1usize..3, 1usize..4, 1usize..5, 1usize..5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transpose_is_adjoint_of_strided_conv((n, ci, h, w) in shape4(), co in 1usize..4, seed in any::<u64>()) {
        let x = randn(&[n, co, 2 * h, 2 * w], seed);
        let y = randn(&[n, ci, h, w], seed ^ 1);
        let k = randn(&[ci, co, 2, 2], seed ^ 2);
        let cx = conv2d(&x, &k, None, ConvGeometry::new(2, 0).unwrap()).unwrap();
        let ty = conv2d_transpose(&y, &k, None, 2).unwrap();
        let lhs = cx.dot(&y).unwrap();
        let rhs = x.dot(&ty).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn identity_kernel_is_identity((n, c, h, w) in shape4(), seed in any::<u64>()) {
        let x = randn(&[n, c, h, w], seed);
        let eye = Tensor::from_fn(vec![c, c, 1, 1], |i| if i / c == i % c { 1.0 } else { 0.0 });
        prop_assert_eq!(conv2d(&x, &eye, None, ConvGeometry::new(1, 0).unwrap()).unwrap(), x);
    }

    #[test]
    fn pool_undoes_duplication((n, c, h, w) in shape4(), seed in any::<u64>()) {
        let x = randn(&[n, c, h, w], seed);
        prop_assert_eq!(maxpool2(&x.upscale2().unwrap()).unwrap().0, x);
    }

    #[test]
    fn concat_then_slice_recovers((n, c, h, w) in shape4(), c2 in 1usize..4, seed in any::<u64>()) {
        let a = randn(&[n, c, h, w], seed);
        let b = randn(&[n, c2, h, w], seed ^ 7);
        let cat = a.concat_channels(&b).unwrap();
        prop_assert_eq!(cat.slice_channels(0, c).unwrap(), a);
        prop_assert_eq!(cat.slice_channels(c, c + c2).unwrap(), b);
    }

    #[test]
    fn kernels_are_deterministic((n, c, h, w) in shape4(), seed in any::<u64>()) {
        let x = randn(&[n, c, 2 * h, 2 * w], seed);
        let k = randn(&[2, c, 3, 3], seed ^ 3);
        let g = ConvGeometry::new(1, 1).unwrap();
        let a = conv2d(&x, &k, None, g).unwrap();
        let b = conv2d(&x, &k, None, g).unwrap();
        prop_assert!(a.data().iter().zip(b.data()).all(|(p, q)| p.to_bits() == q.to_bits()));
    }
}
