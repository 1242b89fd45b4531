//! Randomized finite-difference checks of every differentiable kernel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use soundnet::network::HeadSplit;
use soundnet::ops::{
    batchnorm_backward, batchnorm_forward, conv1d_backward, conv1d_forward, conv_min_input_len, relu_backward,
    relu_forward, transposed_conv1d_backward, transposed_conv1d_forward, transposed_min_input_len, BatchNormParams,
    ConvParams, Mode,
};
use soundnet::synth::random_posterior;
use soundnet::training::{distill_loss, l2_loss, relative_error, TeacherPosterior};
use soundnet::Tensor3;

pub const STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kernel {
    Conv,
    TransposedConv,
    BatchNorm,
    ReluComposition,
    KlHead,
    L2Head,
}

impl Kernel {
    pub const ALL: [Kernel; 6] = [
        Kernel::Conv,
        Kernel::TransposedConv,
        Kernel::BatchNorm,
        Kernel::ReluComposition,
        Kernel::KlHead,
        Kernel::L2Head,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kernel::Conv => "conv1d",
            Kernel::TransposedConv => "transposed conv1d",
            Kernel::BatchNorm => "batchnorm (train)",
            Kernel::ReluComposition => "conv-relu-conv",
            Kernel::KlHead => "softmax-KL head",
            Kernel::L2Head => "l2 head",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub kernel: Kernel,
    pub cases: usize,
    pub entries: usize,
    pub max_error: f64,
    pub worst: String,
}

/// One randomized case: flat parameter arrays, a scalar loss over them and
/// the analytic gradient of that loss.
struct Case {
    label: String,
    arrays: Vec<Vec<f64>>,
    loss: Box<dyn Fn(&[Vec<f64>]) -> f64>,
    grads: Vec<Vec<f64>>,
    /// Restricts the comparison to these `(array, index)` pairs.
    probes: Option<Vec<(usize, usize)>>,
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            scale * z
        })
        .collect()
}

fn tensor(b: usize, c: usize, l: usize, v: Vec<f64>) -> Tensor3<f64> {
    Tensor3::from_vec(b, c, l, v).expect("sizes agree")
}

fn conv_params(out: usize, inp: usize, k: usize, s: usize, p: usize, w: &[f64], bias: &[f64]) -> ConvParams<f64> {
    ConvParams {
        out_channels: out,
        in_channels: inp,
        kernel_size: k,
        stride: s,
        padding: p,
        weights: w.to_vec(),
        bias: bias.to_vec(),
    }
}

fn dot(a: &Tensor3<f64>, r: &[f64]) -> f64 {
    a.as_slice().iter().zip(r).map(|(x, y)| x * y).sum()
}

/// Random conv geometry `(kernel, stride, padding)` with padding below the kernel.
fn geometry(rng: &mut ChaCha8Rng) -> (usize, usize, usize) {
    let k = rng.random_range(1..=5);
    (k, rng.random_range(1..=3), rng.random_range(0..k))
}

fn conv_case(rng: &mut ChaCha8Rng) -> Case {
    let (k, s, p) = geometry(rng);
    let (b, cin, cout) = (
        rng.random_range(1..=3),
        rng.random_range(1..=3),
        rng.random_range(1..=4),
    );
    let len = conv_min_input_len(1, k, s, p) + rng.random_range(0..12);
    let x = gaussian(rng, b * cin * len, 1.0);
    let w = gaussian(rng, cout * cin * k, 0.5);
    let bias = gaussian(rng, cout, 0.5);
    let y = conv1d_forward(
        &tensor(b, cin, len, x.clone()),
        &conv_params(cout, cin, k, s, p, &w, &bias),
    )
    .unwrap();
    let r = gaussian(rng, y.as_slice().len(), 1.0);
    let g = conv1d_backward(
        &tensor(b, cin, len, x.clone()),
        &conv_params(cout, cin, k, s, p, &w, &bias),
        &tensor(b, cout, y.length(), r.clone()),
    )
    .unwrap();
    Case {
        label: format!("b{b} in{cin} out{cout} k{k} s{s} p{p} len{len}"),
        arrays: vec![x, w, bias],
        loss: Box::new(move |a| {
            let y = conv1d_forward(
                &tensor(b, cin, len, a[0].clone()),
                &conv_params(cout, cin, k, s, p, &a[1], &a[2]),
            )
            .unwrap();
            dot(&y, &r)
        }),
        grads: vec![g.input.into_vec(), g.weights, g.bias],
        probes: None,
    }
}

fn transposed_case(rng: &mut ChaCha8Rng) -> Case {
    let (k, s, p) = geometry(rng);
    // the params describe the forward conv `cout -> cin`; the transpose maps back
    let (b, cin, cout) = (
        rng.random_range(1..=3),
        rng.random_range(1..=3),
        rng.random_range(1..=4),
    );
    let len = transposed_min_input_len(1, k, s, p) + rng.random_range(0..8);
    let x = gaussian(rng, b * cout * len, 1.0);
    let w = gaussian(rng, cout * cin * k, 0.5);
    let bias = gaussian(rng, cin, 0.5);
    let params = conv_params(cout, cin, k, s, p, &w, &bias);
    let y = transposed_conv1d_forward(&tensor(b, cout, len, x.clone()), &params).unwrap();
    let r = gaussian(rng, y.as_slice().len(), 1.0);
    let g = transposed_conv1d_backward(
        &tensor(b, cout, len, x.clone()),
        &params,
        &tensor(b, cin, y.length(), r.clone()),
    )
    .unwrap();
    Case {
        label: format!("b{b} in{cout} out{cin} k{k} s{s} p{p} len{len}"),
        arrays: vec![x, w, bias],
        loss: Box::new(move |a| {
            let y = transposed_conv1d_forward(
                &tensor(b, cout, len, a[0].clone()),
                &conv_params(cout, cin, k, s, p, &a[1], &a[2]),
            )
            .unwrap();
            dot(&y, &r)
        }),
        grads: vec![g.input.into_vec(), g.weights, g.bias],
        probes: None,
    }
}

fn bn_params(gamma: &[f64], beta: &[f64]) -> BatchNormParams<f64> {
    BatchNormParams {
        gamma: gamma.to_vec(),
        beta: beta.to_vec(),
        ..BatchNormParams::new(gamma.len())
    }
}

fn batchnorm_case(rng: &mut ChaCha8Rng) -> Case {
    let (b, c) = (rng.random_range(1..=3), rng.random_range(1..=3));
    let len = rng.random_range(2..=8);
    let offset = rng.random_range(-2.0..2.0);
    let spread = rng.random_range(0.5..2.0);
    let x: Vec<f64> = gaussian(rng, b * c * len, spread)
        .into_iter()
        .map(|v| v + offset)
        .collect();
    let gamma: Vec<f64> = gaussian(rng, c, 0.5).into_iter().map(|v| v + 1.0).collect();
    let beta = gaussian(rng, c, 0.5);
    let input = tensor(b, c, len, x.clone());
    let params = bn_params(&gamma, &beta);
    let out = batchnorm_forward(&input, &params, Mode::Train).unwrap();
    let r = gaussian(rng, x.len(), 1.0);
    let g = batchnorm_backward(&input, &params, &out.cache, &tensor(b, c, len, r.clone())).unwrap();
    Case {
        label: format!("b{b} c{c} len{len}"),
        arrays: vec![x, gamma, beta],
        loss: Box::new(move |a| {
            let y = batchnorm_forward(&tensor(b, c, len, a[0].clone()), &bn_params(&a[1], &a[2]), Mode::Train).unwrap();
            dot(&y.output, &r)
        }),
        grads: vec![g.input.into_vec(), g.gamma, g.beta],
        probes: None,
    }
}

/// `conv2(relu(conv1(x)))`, redrawn until no pre-activation sits near the kink.
fn relu_case(rng: &mut ChaCha8Rng) -> Case {
    loop {
        let (k1, s1, p1) = geometry(rng);
        let (k2, s2, p2) = geometry(rng);
        let (b, c0, c1, c2) = (
            rng.random_range(1..=2),
            rng.random_range(1..=2),
            rng.random_range(1..=3),
            rng.random_range(1..=3),
        );
        let mid = conv_min_input_len(1, k2, s2, p2) + rng.random_range(0..4);
        let len = conv_min_input_len(mid, k1, s1, p1) + rng.random_range(0..s1);
        let x = gaussian(rng, b * c0 * len, 1.0);
        let w1 = gaussian(rng, c1 * c0 * k1, 0.5);
        let b1 = gaussian(rng, c1, 0.3);
        let w2 = gaussian(rng, c2 * c1 * k2, 0.5);
        let b2 = gaussian(rng, c2, 0.3);
        let input = tensor(b, c0, len, x.clone());
        let pa = conv_params(c1, c0, k1, s1, p1, &w1, &b1);
        let pb = conv_params(c2, c1, k2, s2, p2, &w2, &b2);
        let z = conv1d_forward(&input, &pa).unwrap();
        if z.as_slice().iter().any(|v| v.abs() < 1e-3) {
            continue;
        }
        let h = relu_forward(&z);
        let y = conv1d_forward(&h, &pb).unwrap();
        let r = gaussian(rng, y.as_slice().len(), 1.0);
        let g2 = conv1d_backward(&h, &pb, &tensor(b, c2, y.length(), r.clone())).unwrap();
        let gz = relu_backward(&z, &g2.input).unwrap();
        let g1 = conv1d_backward(&input, &pa, &gz).unwrap();
        return Case {
            label: format!("b{b} {c0}->{c1}->{c2} k{k1}/{k2} s{s1}/{s2} p{p1}/{p2} len{len}"),
            arrays: vec![x, w1, b1, w2, b2],
            loss: Box::new(move |a| {
                let z = conv1d_forward(
                    &tensor(b, c0, len, a[0].clone()),
                    &conv_params(c1, c0, k1, s1, p1, &a[1], &a[2]),
                )
                .unwrap();
                let y = conv1d_forward(&relu_forward(&z), &conv_params(c2, c1, k2, s2, p2, &a[3], &a[4])).unwrap();
                dot(&y, &r)
            }),
            grads: vec![g1.input.into_vec(), g1.weights, g1.bias, g2.weights, g2.bias],
            probes: None,
        };
    }
}

type HeadLoss = fn(&Tensor3<f64>, &[TeacherPosterior], &HeadSplit) -> soundnet::Result<(f64, Tensor3<f64>)>;

/// Most cases use small heads; every tenth uses the full 1000 + 401 split
/// and probes 40 random logits.
fn head_case(rng: &mut ChaCha8Rng, index: usize, f: HeadLoss) -> Case {
    let full = index % 10 == 9;
    let split = if full {
        HeadSplit::default()
    } else {
        HeadSplit::new(rng.random_range(1..=6), rng.random_range(1..=6)).unwrap()
    };
    let (b, t) = if full {
        (1, 1)
    } else {
        (rng.random_range(1..=3), rng.random_range(1..=3))
    };
    let c = split.total();
    let temperature = rng.random_range(0.5..4.0);
    let teachers: Vec<TeacherPosterior> = (0..b)
        .map(|i| random_posterior(&format!("t{i}"), t, &split, temperature, rng))
        .collect();
    let logits = gaussian(rng, b * c * t, 1.5);
    let (_, g) = f(&tensor(b, c, t, logits.clone()), &teachers, &split).unwrap();
    let probes = full.then(|| (0..40).map(|_| (0, rng.random_range(0..c * t * b))).collect());
    Case {
        label: format!("b{b} classes{c} t{t} temperature{temperature:.2}"),
        arrays: vec![logits],
        loss: Box::new(move |a| f(&tensor(b, c, t, a[0].clone()), &teachers, &split).unwrap().0),
        grads: vec![g.into_vec()],
        probes,
    }
}

/// Max relative error of the case and the number of entries compared.
fn compare(mut case: Case) -> (f64, usize, String) {
    let pairs: Vec<(usize, usize)> = case.probes.take().unwrap_or_else(|| {
        case.arrays
            .iter()
            .enumerate()
            .flat_map(|(a, v)| (0..v.len()).map(move |i| (a, i)))
            .collect()
    });
    let mut worst = (0.0, String::new());
    for &(a, i) in &pairs {
        let v = case.arrays[a][i];
        case.arrays[a][i] = v + STEP;
        let plus = (case.loss)(&case.arrays);
        case.arrays[a][i] = v - STEP;
        let minus = (case.loss)(&case.arrays);
        case.arrays[a][i] = v;
        let numeric = (plus - minus) / (2.0 * STEP);
        let err = relative_error(case.grads[a][i], numeric);
        if err > worst.0 {
            worst = (
                err,
                format!(
                    "{} array {a}[{i}]: analytic {:.6e} numeric {numeric:.6e}",
                    case.label, case.grads[a][i]
                ),
            );
        }
    }
    (worst.0, pairs.len(), worst.1)
}

pub fn run_kernel(kernel: Kernel, cases: usize, seed: u64) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut result = SuiteResult {
        kernel,
        cases,
        entries: 0,
        max_error: 0.0,
        worst: String::new(),
    };
    for i in 0..cases {
        let case = match kernel {
            Kernel::Conv => conv_case(&mut rng),
            Kernel::TransposedConv => transposed_case(&mut rng),
            Kernel::BatchNorm => batchnorm_case(&mut rng),
            Kernel::ReluComposition => relu_case(&mut rng),
            Kernel::KlHead => head_case(&mut rng, i, distill_loss::<f64>),
            Kernel::L2Head => head_case(&mut rng, i, l2_loss::<f64>),
        };
        let (err, n, worst) = compare(case);
        result.entries += n;
        if err >= result.max_error {
            result.max_error = err;
            result.worst = worst;
        }
    }
    result
}
