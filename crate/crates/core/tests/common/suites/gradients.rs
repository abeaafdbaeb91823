use crate::common::*;
use hearvol_core::gradcheck::{central_difference, max_relative_error};
use hearvol_core::nnops::{
    kl_divergence, mse_loss, Conv3d, ConvTranspose3d, Dense, Layer, Padding,
};
use hearvol_core::tensor::{Rng, Tensor};

fn assert_layer(name: &str, layer: Layer<f64>, x: Tensor<f64>, rng: &mut Rng) {
    let c = check_layer(&layer, &x, rng);
    assert!(
        c.worst() < LAYER_TOL,
        "{name} on {:?}: input err {:.2e}, param err {:.2e}",
        x.shape(),
        c.input_err,
        c.param_err
    );
}

pub fn conv3d_gradients() {
    let mut rng = Rng::new(100);
    // (in_ch, out_ch, spatial, kernel, stride, padding)
    let cases = [
        (1, 2, [4, 4, 4], 3, 1, Padding::Valid),
        (2, 3, [5, 4, 6], 3, 1, Padding::Same),
        (1, 2, [8, 8, 8], 3, 2, Padding::Explicit(1)),
        (3, 1, [4, 5, 4], 2, 2, Padding::Valid),
    ];
    for (ic, oc, sp, k, s, p) in cases {
        let mut conv = Conv3d::init(&mut rng, ic, oc, k, s, p);
        conv.bias = random(&mut rng, &[oc]);
        let x = random(&mut rng, &[ic, sp[0], sp[1], sp[2]]);
        assert_layer("conv3d", Layer::Conv3d(conv), x, &mut rng);
    }
}

pub fn conv_transpose3d_gradients() {
    let mut rng = Rng::new(101);
    // (in_ch, out_ch, spatial, kernel, stride, padding, output_padding)
    let cases = [
        (1, 1, [2, 2, 2], 2, 2, 0, 0),
        (2, 1, [4, 4, 4], 3, 2, 1, 1),
        (2, 3, [3, 2, 4], 3, 1, 1, 0),
    ];
    for (ic, oc, sp, k, s, p, op) in cases {
        let mut up = ConvTranspose3d::init(&mut rng, ic, oc, k, s, p, op);
        up.bias = random(&mut rng, &[oc]);
        let x = random(&mut rng, &[ic, sp[0], sp[1], sp[2]]);
        if (ic, sp, k, s) == (1, [2, 2, 2], 2, 2) {
            assert_eq!(up.output_shape(x.shape()).unwrap(), vec![1, 4, 4, 4]);
        }
        assert_layer("conv_transpose3d", Layer::ConvTranspose3d(up), x, &mut rng);
    }
}

pub fn dense_gradients() {
    let mut rng = Rng::new(102);
    for (i, o) in [(5, 3), (1, 4), (7, 7)] {
        let mut d = Dense::init(&mut rng, i, o);
        d.bias = random(&mut rng, &[o]);
        let x = random(&mut rng, &[i]);
        assert_layer("dense", Layer::Dense(d), x, &mut rng);
    }
}

pub fn activation_gradients() {
    let mut rng = Rng::new(103);
    for shape in [vec![7], vec![2, 3, 4], vec![1, 4, 4, 4]] {
        let x = random_away_from_zero(&mut rng, &shape, 0.01);
        assert_layer("relu", Layer::Relu, x, &mut rng);
        let x = random(&mut rng, &shape).scale(4.0);
        let c = check_layer(&Layer::Sigmoid, &x, &mut rng);
        assert!(c.worst() < 1e-5, "sigmoid err {:.2e}", c.worst());
    }
}

pub fn reshape_layers_pass_gradients_through() {
    let mut rng = Rng::new(104);
    let x = random(&mut rng, &[2, 2, 3, 2]);
    assert_layer("flatten", Layer::Flatten, x.clone(), &mut rng);
    assert_layer("reshape", Layer::Reshape(vec![6, 4]), x, &mut rng);
}

pub fn mse_gradient_matches_finite_differences() {
    let mut rng = Rng::new(105);
    for n in [1, 6, 30] {
        let p = random(&mut rng, &[n]);
        let t = random(&mut rng, &[n]);
        let (_, g) = mse_loss(&p, &t).unwrap();
        let idx: Vec<usize> = (0..n).collect();
        let num = central_difference(
            |d| mse_loss(&Tensor::vector(d), &t).unwrap().0,
            p.data(),
            &idx,
            FD_STEP,
        );
        for (a, b) in g.data().iter().zip(&num) {
            assert!((a - b).abs() < 1e-6);
        }
    }
}

pub fn kl_gradient_matches_finite_differences() {
    let mut rng = Rng::new(106);
    for shape in [vec![4], vec![3, 5], vec![1, 64]] {
        let mu = random(&mut rng, &shape);
        let lv = random(&mut rng, &shape);
        let kl = kl_divergence(&mu, &lv).unwrap();
        let idx: Vec<usize> = (0..mu.len()).collect();
        let num_mu = central_difference(
            |d| kl_divergence(&Tensor::from_vec(&shape, d.to_vec()).unwrap(), &lv).unwrap().loss,
            mu.data(),
            &idx,
            FD_STEP,
        );
        let num_lv = central_difference(
            |d| kl_divergence(&mu, &Tensor::from_vec(&shape, d.to_vec()).unwrap()).unwrap().loss,
            lv.data(),
            &idx,
            FD_STEP,
        );
        // Truncation error of the h=1e-3 stencil on exp(logvar) is ~1e-7 absolute,
        // so entries far below the tensor's gradient scale are compared against that scale.
        let floor_mu = 0.1 * kl.grad_mu.max_abs();
        let floor_lv = 0.1 * kl.grad_logvar.max_abs();
        assert!(max_relative_error(kl.grad_mu.data(), &num_mu, floor_mu) < 1e-5);
        assert!(max_relative_error(kl.grad_logvar.data(), &num_lv, floor_lv) < 1e-5);
    }
}

pub fn conv_adjoint_identity() {
    let mut rng = Rng::new(107);
    // (spatial, kernel, stride, padding)
    let cases = [
        ([6, 6, 6], 3, 1, Padding::Valid),
        ([5, 7, 4], 3, 1, Padding::Same),
        ([8, 8, 8], 3, 2, Padding::Explicit(1)),
        ([4, 4, 4], 2, 2, Padding::Valid),
        ([7, 7, 7], 3, 2, Padding::Valid),
    ];
    for (sp, k, s, p) in cases {
        let conv = Conv3d::<f64>::init(&mut rng, 2, 3, k, s, p);
        let up = ConvTranspose3d::adjoint_of(&conv, sp).unwrap();
        let x = random(&mut rng, &[2, sp[0], sp[1], sp[2]]);
        let cx = conv.forward(&x).unwrap();
        let y = random(&mut rng, cx.shape());
        let uy = up.forward(&y).unwrap();
        assert_eq!(uy.shape(), x.shape());
        let lhs = cx.dot(&y).unwrap();
        let rhs = x.dot(&uy).unwrap();
        assert!((lhs - rhs).abs() <= 1e-4 * lhs.abs().max(rhs.abs()), "{lhs} vs {rhs}");
    }
}

pub fn forward_is_deterministic() {
    let mut rng = Rng::new(108);
    let conv = Layer::Conv3d(Conv3d::<f32>::init(&mut rng, 1, 4, 3, 2, Padding::Explicit(1)));
    let x: Tensor<f32> = hearvol_core::tensor::uniform_sample(&mut rng, &[1, 8, 8, 8], 0.0, 1.0);
    let a = conv.forward(&x).unwrap();
    let b = conv.forward(&x).unwrap();
    assert_eq!(a.data(), b.data());
}

pub mod end_to_end {
    use crate::common::{FD_FLOOR, FD_STEP};
    use hearvol_core::gradcheck::relative_error;
    use hearvol_core::latent::{build_model, reparameterize_with, EncoderDecoder, LatentDistribution, ModelConfig, ModelKind};
    use hearvol_core::nnops::{Layer, Network};
    use hearvol_core::tensor::{gaussian_sample, uniform_sample, Rng, Tensor};

    const END_TO_END_TOL: f64 = 1e-3;
    const PER_TENSOR: usize = 3;

    fn relu_signs(net: &Network<f64>, x: &Tensor<f64>, out: &mut Vec<bool>) -> Tensor<f64> {
        let trace = net.forward_trace(x).unwrap();
        for (layer, input) in net.layers.iter().zip(&trace.activations) {
            if matches!(layer, Layer::Relu) {
                out.extend(input.data().iter().map(|&v| v > 0.0));
            }
        }
        trace.output().clone()
    }

    /// Which relu units are active. A central difference whose two probes
    /// disagree here straddles a kink and says nothing about the derivative.
    fn activation_pattern(m: &EncoderDecoder<f64>, x: &Tensor<f64>, eps: Option<&Tensor<f64>>) -> Vec<bool> {
        let mut signs = Vec::new();
        let h = relu_signs(&m.encoder, x, &mut signs);
        let z = match &m.heads {
            None => h,
            Some(heads) => {
                let d = LatentDistribution::new(heads.mu.forward(&h).unwrap(), heads.logvar.forward(&h).unwrap()).unwrap();
                reparameterize_with(&d, eps.unwrap()).unwrap()
            }
        };
        relu_signs(&m.decoder, &z, &mut signs);
        signs
    }

    fn check(kind: ModelKind, shape: [usize; 3], seed: u64) {
        let cfg = ModelConfig { kind, latent_dim: 6, channels: vec![3, 4, 5], beta: 0.3 };
        let mut rng = Rng::new(seed);
        let mut model: EncoderDecoder<f64> = build_model(&cfg, shape, &mut rng).unwrap();
        // Perturb every parameter off its init; a small positive shift keeps
        // most relu units of this tiny model alive.
        for p in model.params_mut() {
            let noise: Tensor<f64> = uniform_sample(&mut rng, p.shape(), -0.02, 0.08);
            p.axpy(1.0, &noise).unwrap();
        }
        let [d, h, w] = shape;
        let x: Tensor<f64> = uniform_sample(&mut rng, &[1, d, h, w], 0.0, 1.0);
        let eps = match kind {
            ModelKind::Vae => Some(gaussian_sample(&mut rng, &[6], 0.0, 1.0).unwrap()),
            ModelKind::Ae => None,
        };
        let (_, grads) = model.loss_and_grads(&x, eps.as_ref()).unwrap();

        let (mut checked, mut straddled) = (0, 0);
        let mut worst = 0.0f64;
        for t in 0..model.params().len() {
            let len = model.params()[t].len();
            let mut order: Vec<usize> = (0..len).collect();
            rng.shuffle(&mut order);
            let mut here = 0;
            for i in order {
                if here == PER_TENSOR {
                    break;
                }
                let mut probe = model.clone();
                let orig = probe.params()[t].data()[i];
                probe.params_mut()[t].data_mut()[i] = orig + FD_STEP;
                let up = probe.loss(&x, eps.as_ref()).unwrap().total;
                let up_pattern = activation_pattern(&probe, &x, eps.as_ref());
                probe.params_mut()[t].data_mut()[i] = orig - FD_STEP;
                let down = probe.loss(&x, eps.as_ref()).unwrap().total;
                if activation_pattern(&probe, &x, eps.as_ref()) != up_pattern {
                    straddled += 1;
                    continue;
                }
                let numeric = (up - down) / (2.0 * FD_STEP);
                let analytic = grads[t].data()[i];
                // dead units give 0 = 0; count only weights that carry signal
                if analytic.abs().max(numeric.abs()) < FD_FLOOR {
                    continue;
                }
                worst = worst.max(relative_error(analytic, numeric, FD_FLOOR));
                here += 1;
                checked += 1;
            }
        }
        assert!(checked >= 20, "only {checked} weights checked ({straddled} straddled a kink)");
        assert!(worst < END_TO_END_TOL, "{kind:?} {shape:?}: worst relative error {worst:e}");
    }

    pub fn autoencoder_loss_gradient() {
        check(ModelKind::Ae, [8, 8, 8], 1);
        check(ModelKind::Ae, [8, 16, 8], 2);
    }

    pub fn vae_loss_gradient() {
        check(ModelKind::Vae, [8, 8, 8], 3);
        check(ModelKind::Vae, [16, 8, 8], 4);
    }
}
