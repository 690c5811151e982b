//! Acceptance suite: ten go/no-go criteria covering the dimension contract,
//! backbone generality, loss and gradient correctness, the optimization
//! recipe, label algebra, ensembling, aggregation and documentation.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see one
//! pass/fail line per criterion. The criteria run sequentially inside a
//! single test so their runtime budgets are meaningful.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use burn::backend::ndarray::{NdArray, NdArrayDevice};
use burn::backend::Autodiff;
use burn::module::{AutodiffModule, Module, ModuleMapper, ModuleVisitor, Param};
use burn::tensor::{DType, Distribution, Tensor, TensorData};
use ndarray::Array3;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use dimshrink_core::nifti_io::save_labels;
use dimshrink_core::{
    build_net, combined_loss, ensemble_predict, labels_to_nested, make_phantom, nested_to_labels,
    probs_to_labels, soft_dice, train, train_resumed, zscore_normalize, BackboneArch,
    BackboneRegistry, DecoderConfig, DimShrinkNet, LabelMap, NetConfig, PlateauSchedule,
    ShrinkConfig, TrainCase, TrainConfig, DICE_EPSILON,
};

type B = NdArray<f32>;
type Ad = Autodiff<B>;

fn device() -> NdArrayDevice {
    Default::default()
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Result<String, String>); 10] = [
        ("dimension contract 192x160x108, factors (3,3,4)", criterion_1),
        ("generic backbone via registry on 32x32x12", criterion_2),
        ("loss matches scalar oracles", criterion_3),
        ("gradient check vs central differences (f64)", criterion_4),
        ("overfit one phantom to Dice > 0.95", criterion_5),
        ("plateau schedule: one x0.1 cut after 50 stagnant epochs", criterion_6),
        ("label algebra round trip over 1000 random maps", criterion_7),
        ("ensemble equals mean of sigmoids", criterion_8),
        ("evaluate reproduces hand-computed mean/std/median", criterion_9),
        ("paper-scale tables documented as out of desk-scale reach", criterion_10),
    ];
    let mut failures = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        eprintln!("criterion {:>2} running: {name}", i + 1);
        let start = Instant::now();
        match run() {
            Ok(detail) => println!(
                "criterion {:>2} PASS  {name} ({detail}; {:.1?})",
                i + 1,
                start.elapsed()
            ),
            Err(why) => {
                println!("criterion {:>2} FAIL  {name}: {why}", i + 1);
                failures.push(format!("criterion {}: {why}", i + 1));
            }
        }
    }
    assert!(failures.is_empty(), "failed criteria:\n{}", failures.join("\n"));
}

/// Paper geometry with desk-scale channel widths: depths must shrink
/// 108 -> 36 -> 12 -> 3, the 2D bridge must be 192x160x3, and the output
/// must match the input grid with three channels.
fn criterion_1() -> Result<String, String> {
    let start = Instant::now();
    let dev = device();
    let cfg = NetConfig {
        shrink: ShrinkConfig {
            input_depth: 108,
            factors: vec![3, 3, 4],
            channels: vec![4, 4, 4],
            groups: 2,
        },
        backbone: BackboneArch::Cnn {
            channels: vec![4, 4, 4],
        },
        decoder: DecoderConfig {
            channels_2d: vec![4, 4],
            bridge_channels: 3,
            channels_3d: vec![4, 4, 4],
            groups: 2,
        },
    };
    let depths = cfg.shrink.stage_depths();
    if depths != vec![36, 12, 3] {
        return Err(format!("stage depths {depths:?}, want [36, 12, 3]"));
    }
    let net = build_net::<B>(&cfg, 0, &dev).map_err(|e| e.to_string())?;
    let vol = Tensor::<B, 5>::random([1, 1, 192, 160, 108], Distribution::Default, &dev);
    let (bridge, skips) = net.encoder.forward(vol.clone()).map_err(|e| e.to_string())?;
    if bridge.dims() != [1, 3, 192, 160] {
        return Err(format!("bridge dims {:?}, want [1, 3, 192, 160]", bridge.dims()));
    }
    let skip_depths: Vec<usize> = skips.iter().map(|s| s.dims()[4]).collect();
    if skip_depths != vec![36, 12, 3] {
        return Err(format!("skip depths {skip_depths:?}, want [36, 12, 3]"));
    }
    let out = net.forward(vol).map_err(|e| e.to_string())?;
    if out.dims() != [1, 3, 192, 160, 108] {
        return Err(format!("output dims {:?}, want [1, 3, 192, 160, 108]", out.dims()));
    }
    let elapsed = start.elapsed();
    if elapsed.as_secs() >= 60 {
        return Err(format!("runtime {elapsed:.1?} exceeds the 1 min budget"));
    }
    Ok(format!("full-size forward in {elapsed:.1?}"))
}

/// A freshly registered toy CNN backbone drives the same pipeline
/// end-to-end on a 32x32x12 volume with factors (2,2).
fn criterion_2() -> Result<String, String> {
    let dev = device();
    let mut registry = BackboneRegistry::with_defaults();
    registry
        .register("toy-cnn", BackboneArch::Cnn { channels: vec![8, 16, 16] })
        .map_err(|e| e.to_string())?;
    let entry = registry.entry("toy-cnn").map_err(|e| e.to_string())?;
    let cfg = NetConfig {
        shrink: ShrinkConfig {
            input_depth: 12,
            factors: vec![2, 2],
            channels: vec![8, 8],
            groups: 4,
        },
        backbone: entry.arch.clone(),
        decoder: DecoderConfig {
            channels_2d: vec![16, 8],
            bridge_channels: 6,
            channels_3d: vec![8, 8],
            groups: 4,
        },
    };
    let net = build_net::<B>(&cfg, 1, &dev).map_err(|e| e.to_string())?;
    let vol = Tensor::<B, 5>::random([1, 1, 32, 32, 12], Distribution::Default, &dev);
    let out = net.forward(vol).map_err(|e| e.to_string())?;
    if out.dims() != [1, 3, 32, 32, 12] {
        return Err(format!("output dims {:?}, want [1, 3, 32, 32, 12]", out.dims()));
    }
    let (min, max): (f32, f32) = (
        out.clone().min().into_scalar(),
        out.max().into_scalar(),
    );
    if !(0.0..=1.0).contains(&min) || max > 1.0 {
        return Err(format!("probabilities out of range: [{min}, {max}]"));
    }
    Ok("registered backbone ran end-to-end".into())
}

/// Soft Dice and the combined loss against independent scalar loops on
/// random 4x4x4 cases, plus the self-overlap and disjoint identities.
/// Runs on explicitly 64-bit tensors so the 1e-6 bound tests the formulas,
/// not float32 rounding.
fn criterion_3() -> Result<String, String> {
    let dev = device();
    let f64_tensor = |data: Vec<f64>, shape: [usize; 5]| {
        Tensor::<B64, 5>::from_data(
            TensorData::new(data, shape),
            burn::tensor::TensorCreationOptions::<B64>::new(dev).with_dtype(DType::F64),
        )
    };
    let shape = [1usize, 3, 4, 4, 4];
    let len: usize = shape.iter().product();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for trial in 0..10 {
        let pv: Vec<f64> = (0..len).map(|_| rng.random_range(0.01..0.99)).collect();
        let tv: Vec<f64> = (0..len).map(|_| f64::from(rng.random_bool(0.5))).collect();
        let pred = f64_tensor(pv.clone(), shape);
        let target = f64_tensor(tv.clone(), shape);

        // independent scalar-loop oracle
        let mut oracle_dice = 0.0f64;
        let per = len / 3;
        for c in 0..3 {
            let (mut inter, mut sp, mut st) = (0.0f64, 0.0f64, 0.0f64);
            for i in 0..per {
                let p = pv[c * per + i];
                let t = tv[c * per + i];
                inter += p * t;
                sp += p * p;
                st += t * t;
            }
            oracle_dice += 2.0 * inter / (sp + st + DICE_EPSILON);
        }
        oracle_dice /= 3.0;
        let mut oracle_bce = 0.0f64;
        for (&p, &t) in pv.iter().zip(&tv) {
            let p = p.clamp(1e-7, 1.0 - 1e-7);
            oracle_bce -= t * p.ln() + (1.0 - t) * (1.0 - p).ln();
        }
        oracle_bce /= len as f64;

        let got_dice: f64 = soft_dice(pred.clone(), target.clone(), DICE_EPSILON)
            .map_err(|e| e.to_string())?
            .into_scalar();
        let (_, value) =
            combined_loss(pred, target, DICE_EPSILON).map_err(|e| e.to_string())?;
        if (got_dice - oracle_dice).abs() >= 1e-6 {
            return Err(format!("trial {trial}: dice {got_dice} vs oracle {oracle_dice}"));
        }
        if (value.total - (oracle_bce - oracle_dice)).abs() >= 1e-6 {
            return Err(format!(
                "trial {trial}: total {} vs oracle {}",
                value.total,
                oracle_bce - oracle_dice
            ));
        }
    }
    // self overlap: 1 - O(epsilon)
    let mask: Vec<f64> = (0..len).map(|i| f64::from(i % 3 == 0)).collect();
    let m = f64_tensor(mask, shape);
    let self_dice: f64 = soft_dice(m.clone(), m, DICE_EPSILON)
        .map_err(|e| e.to_string())?
        .into_scalar();
    if !(self_dice < 1.0 && (1.0 - self_dice) < 1e-3) {
        return Err(format!("soft_dice(p, p) = {self_dice}, want 1 - O(eps)"));
    }
    // disjoint masks: exactly zero overlap
    let a: Vec<f64> = (0..len).map(|i| f64::from(i % 2 == 0)).collect();
    let b: Vec<f64> = a.iter().map(|v| 1.0 - v).collect();
    let disjoint: f64 = soft_dice(f64_tensor(a, shape), f64_tensor(b, shape), DICE_EPSILON)
        .map_err(|e| e.to_string())?
        .into_scalar();
    if disjoint != 0.0 {
        return Err(format!("disjoint dice {disjoint}, want 0"));
    }
    Ok("10 random cases within 1e-6 at 64-bit precision".into())
}

/// The gradient check runs in a child process so the device can be locked
/// to 64-bit floats before any tensor exists; this test process already
/// created f32 tensors for the other criteria.
fn criterion_4() -> Result<String, String> {
    let exe = std::env::current_exe().map_err(|e| e.to_string())?;
    let output = Command::new(exe)
        .args(["criterion4_gradcheck_worker", "--ignored", "--exact", "--nocapture"])
        .output()
        .map_err(|e| e.to_string())?;
    if output.status.success() {
        Ok("child process: model-parameter gradients match finite differences".into())
    } else {
        Err(format!(
            "gradcheck worker failed:\n{}{}",
            String::from_utf8_lossy(&output.stdout),
            String::from_utf8_lossy(&output.stderr)
        ))
    }
}

/// Collects every float parameter as flattened f64 values and gradients.
struct ParamCollector<'a> {
    grads: &'a <Ad64 as burn::tensor::backend::AutodiffBackend>::Gradients,
    params: Vec<(burn::module::ParamId, Vec<f64>, Vec<f64>)>,
}

type B64 = NdArray<f64>;
type Ad64 = Autodiff<B64>;

impl ModuleVisitor<Ad64> for ParamCollector<'_> {
    fn visit_float<const D: usize>(&mut self, param: &Param<Tensor<Ad64, D>>) {
        let values: Vec<f64> = param
            .val()
            .into_data()
            .convert::<f64>()
            .to_vec()
            .expect("readback");
        let grads: Vec<f64> = match param.val().grad(self.grads) {
            Some(g) => g.into_data().convert::<f64>().to_vec().expect("readback"),
            None => vec![0.0; values.len()],
        };
        self.params.push((param.id, values, grads));
    }
}

/// Adds `delta` to one scalar entry of one parameter tensor.
struct Perturb {
    target: burn::module::ParamId,
    index: usize,
    delta: f64,
}

impl ModuleMapper<Ad64> for Perturb {
    fn map_float<const D: usize>(&mut self, param: Param<Tensor<Ad64, D>>) -> Param<Tensor<Ad64, D>> {
        let (id, tensor, mapper) = param.consume();
        let tensor = if id == self.target {
            let shape = tensor.dims();
            let device = tensor.device();
            let mut values: Vec<f64> = tensor
                .into_data()
                .convert::<f64>()
                .to_vec()
                .expect("readback");
            values[self.index] += self.delta;
            Tensor::from_data(TensorData::new(values, shape), &device)
        } else {
            tensor
        };
        Param::from_mapped_value(id, tensor, mapper)
    }
}

/// Only run by `criterion_4` via a fresh process: the first statement locks
/// the shared CPU device to F64 so the whole model trains in 64-bit.
#[test]
#[ignore = "spawned by the acceptance test in its own process"]
fn criterion4_gradcheck_worker() {
    let dev = device();
    burn::tensor::set_default_dtypes::<B64>(&dev, DType::F64, DType::I64)
        .expect("no tensors created yet in this process");
    let cfg = NetConfig {
        shrink: ShrinkConfig {
            input_depth: 12,
            factors: vec![2, 2],
            channels: vec![4, 4],
            groups: 2,
        },
        backbone: BackboneArch::Cnn { channels: vec![4, 4, 4] },
        decoder: DecoderConfig {
            channels_2d: vec![4, 4],
            bridge_channels: 3,
            channels_3d: vec![4, 4],
            groups: 2,
        },
    };
    let model = build_net::<Ad64>(&cfg, 5, &dev).unwrap();
    let shape = [1usize, 1, 8, 8, 12];
    let tshape = [1usize, 3, 8, 8, 12];
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let xv: Vec<f64> = (0..shape.iter().product::<usize>())
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let tv: Vec<f64> = (0..tshape.iter().product::<usize>())
        .map(|_| f64::from(rng.random_bool(0.4)))
        .collect();
    let x = Tensor::<Ad64, 5>::from_data(TensorData::new(xv, shape), &dev);
    let t = Tensor::<Ad64, 5>::from_data(TensorData::new(tv, tshape), &dev);

    let eval = |m: &DimShrinkNet<Ad64>| -> f64 {
        let probs = m.forward(x.clone()).unwrap();
        combined_loss(probs, t.clone(), DICE_EPSILON).unwrap().1.total
    };

    let probs = model.forward(x.clone()).unwrap();
    let (loss, _) = combined_loss(probs, t.clone(), DICE_EPSILON).unwrap();
    let grads = loss.backward();
    let mut collector = ParamCollector { grads: &grads, params: Vec::new() };
    model.visit(&mut collector);
    let n = collector.params.len();
    assert!(n >= 5, "model has only {n} parameter tensors");

    // one parameter tensor from each part of the model, checking the entry
    // with the largest gradient so the relative comparison is conditioned
    let picks = [0, n / 4, n / 2, 3 * n / 4, n - 1];
    let h = 1e-5;
    let mut checked = 0;
    for &p in &picks {
        let (id, _, grad) = &collector.params[p];
        // entries by descending |gradient| so the relative comparison is
        // well conditioned
        let mut order: Vec<usize> = (0..grad.len()).collect();
        order.sort_by(|&a, &b| grad[b].abs().total_cmp(&grad[a].abs()));
        let mut verified = false;
        for &index in order.iter().take(8) {
            let analytic = grad[index];
            let diff = |h: f64| {
                let plus = model
                    .clone()
                    .map(&mut Perturb { target: *id, index, delta: h });
                let minus = model
                    .clone()
                    .map(&mut Perturb { target: *id, index, delta: -h });
                (eval(&plus) - eval(&minus)) / (2.0 * h)
            };
            let d1 = diff(h);
            let d2 = diff(h / 2.0);
            let scale = analytic.abs().max(d2.abs()).max(1e-6);
            // the loss is only piecewise smooth (ReLU, depth max-pool);
            // two step sizes that disagree mean the probe straddles a kink,
            // where central differences say nothing about the gradient —
            // move to the next entry of the same tensor. A genuinely wrong
            // gradient still fails: d1 and d2 then agree with each other
            // but not with the autodiff value.
            if (d1 - d2).abs() / scale > 3e-5 {
                println!("param {p:>2} entry {index:>4}: kink detected, re-probing");
                continue;
            }
            let numeric = (4.0 * d2 - d1) / 3.0;
            let rel = (numeric - analytic).abs() / scale;
            println!(
                "param {p:>2} entry {index:>4}: analytic {analytic:+.6e} numeric {numeric:+.6e} rel {rel:.2e}"
            );
            assert!(rel < 1e-4, "param {p}: relative error {rel} >= 1e-4");
            verified = true;
            break;
        }
        assert!(verified, "param {p}: no kink-free probe entry among the top 8");
        checked += 1;
    }
    assert!(checked >= 5);
}

/// Training a toy model on a single phantom reaches hard Dice > 0.95 on
/// all three regions within 500 optimizer steps.
fn criterion_5() -> Result<String, String> {
    let dev = device();
    let phantom = make_phantom(11, [32, 32, 12]).map_err(|e| e.to_string())?;
    let volume = zscore_normalize(&phantom.volume, Default::default())
        .map_err(|e| e.to_string())?;
    let case = TrainCase {
        id: "phantom".into(),
        volume: volume.data,
        mask: labels_to_nested(&phantom.labels),
    };
    let mut cfg = TrainConfig::toy_default();
    cfg.learning_rate = 1e-3;
    cfg.plateau_patience = 10_000;
    cfg.max_reductions = 10_000;

    // one case, batch size 1: steps == epochs; train in chunks so we can
    // stop as soon as the target is reached
    let chunk = 25;
    let mut steps = 0;
    let mut outcome = None;
    while steps < 500 {
        cfg.max_epochs = (steps + chunk).min(500);
        let next = match outcome {
            None => train::<Ad>(&cfg, std::slice::from_ref(&case), &dev, |_| {}),
            Some(prev) => {
                let dimshrink_core::TrainOutcome { model, optimizer, schedule, .. } = prev;
                train_resumed::<Ad>(
                    &cfg,
                    std::slice::from_ref(&case),
                    &dev,
                    model,
                    optimizer,
                    schedule,
                    steps,
                    |_| {},
                )
            }
        }
        .map_err(|e| e.to_string())?;
        steps = next.epochs_run;
        let probs = next
            .model
            .valid()
            .forward(dimshrink_core::volume_to_tensor::<B>(&case.volume, &dev))
            .map_err(|e| e.to_string())?;
        let (_, pred) = probs_to_labels(probs, 0.5).map_err(|e| e.to_string())?;
        let wt = dimshrink_core::dice_metric(&pred.wt, &case.mask.wt).map_err(|e| e.to_string())?;
        let tc = dimshrink_core::dice_metric(&pred.tc, &case.mask.tc).map_err(|e| e.to_string())?;
        let et = dimshrink_core::dice_metric(&pred.et, &case.mask.et).map_err(|e| e.to_string())?;
        eprintln!("  overfit: step {steps:>3}, Dice wt/tc/et {wt:.3}/{tc:.3}/{et:.3}");
        if wt > 0.95 && tc > 0.95 && et > 0.95 {
            return Ok(format!(
                "Dice wt/tc/et {wt:.3}/{tc:.3}/{et:.3} after {steps} steps"
            ));
        }
        if steps >= 500 {
            return Err(format!(
                "after {steps} steps Dice wt/tc/et {wt:.3}/{tc:.3}/{et:.3} <= 0.95"
            ));
        }
        outcome = Some(next);
    }
    unreachable!("loop returns before running out of steps");
}

/// Exactly one x0.1 learning-rate cut fires after 50 non-improving epochs.
fn criterion_6() -> Result<String, String> {
    let mut schedule = PlateauSchedule::new(1e-4, 0.1, 50);
    schedule.observe(1.0); // first observation establishes the best loss
    for i in 0..49 {
        let lr = schedule.observe(1.0);
        if lr != 1e-4 || schedule.reductions() != 0 {
            return Err(format!("premature reduction at stagnant epoch {}", i + 1));
        }
    }
    let lr = schedule.observe(1.0); // 50th stagnant epoch
    if !((lr - 1e-5).abs() < 1e-18 && schedule.reductions() == 1) {
        return Err(format!(
            "after 50 stagnant epochs lr {lr}, reductions {}",
            schedule.reductions()
        ));
    }
    // and only one: the counter was reset
    for _ in 0..49 {
        schedule.observe(1.0);
    }
    if schedule.reductions() != 1 {
        return Err("second reduction fired before 50 further stagnant epochs".into());
    }
    Ok("single reduction at exactly 50".into())
}

/// labels -> nested masks -> labels is the identity, and nesting holds, on
/// 1000 random label maps.
fn criterion_7() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let alphabet = [0u8, 1, 2, 4];
    for trial in 0..1000 {
        let labels = LabelMap::new(Array3::from_shape_fn((6, 5, 4), |_| {
            alphabet[rng.random_range(0..alphabet.len())]
        }))
        .map_err(|e| e.to_string())?;
        let nested = labels_to_nested(&labels);
        if !nested.nesting_holds() {
            return Err(format!("trial {trial}: nesting violated"));
        }
        let back = nested_to_labels(
            &nested.wt.mapv(f32::from),
            &nested.tc.mapv(f32::from),
            &nested.et.mapv(f32::from),
            0.5,
        )
        .map_err(|e| e.to_string())?;
        if back != labels {
            return Err(format!("trial {trial}: round trip changed the label map"));
        }
    }
    Ok("1000 round trips exact".into())
}

/// Mean of sigmoids: four identical models reproduce the single model
/// exactly; four distinct models match a hand-computed mean within 1e-7.
fn criterion_8() -> Result<String, String> {
    let dev = device();
    let cfg = NetConfig::toy_default();
    let vol = Tensor::<B, 5>::random([1, 1, 8, 8, 12], Distribution::Default, &dev);

    let same: Vec<_> = (0..4)
        .map(|_| build_net::<B>(&cfg, 3, &dev).unwrap())
        .collect();
    let single = same[0].forward(vol.clone()).map_err(|e| e.to_string())?;
    let inputs = vec![vol.clone(); 4];
    let ensembled = ensemble_predict(&same, &inputs).map_err(|e| e.to_string())?;
    let diff: f32 = (ensembled - single).abs().max().into_scalar();
    if diff != 0.0 {
        return Err(format!("identical-model ensemble differs by {diff}"));
    }

    let distinct: Vec<_> = (0..4)
        .map(|seed| build_net::<B>(&cfg, seed, &dev).unwrap())
        .collect();
    let mut by_hand: Option<Tensor<B, 5>> = None;
    for model in &distinct {
        let p = model.forward(vol.clone()).map_err(|e| e.to_string())?;
        by_hand = Some(match by_hand {
            Some(acc) => acc + p.div_scalar(4.0),
            None => p.div_scalar(4.0),
        });
    }
    let ensembled = ensemble_predict(&distinct, &inputs).map_err(|e| e.to_string())?;
    let diff: f32 = (ensembled - by_hand.expect("four models"))
        .abs()
        .max()
        .into_scalar();
    if diff >= 1e-7 {
        return Err(format!("distinct-model ensemble off by {diff}"));
    }
    Ok("exact for identical models, within 1e-7 for distinct".into())
}

/// `dimshrink evaluate` on constructed predictions with Dice 1.0, 0.0 and
/// 0.5 reproduces the hand-computed mean/std/median in Table-2 layout.
fn criterion_9() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let truth_dir = dir.path().join("truth");
    let pred_dir = dir.path().join("pred");
    let out_dir = dir.path().join("report");
    std::fs::create_dir_all(&truth_dir).map_err(|e| e.to_string())?;
    std::fs::create_dir_all(&pred_dir).map_err(|e| e.to_string())?;

    // label 4 voxels only, so ET = TC = WT and every region scores alike
    let make = |voxels: &[[usize; 3]]| {
        let mut data = Array3::<u8>::zeros((4, 4, 4));
        for &v in voxels {
            data[v] = 4;
        }
        LabelMap::new(data).expect("valid labels")
    };
    let cases: [(&str, Vec<[usize; 3]>, Vec<[usize; 3]>); 3] = [
        ("a", vec![[0, 0, 0], [1, 0, 0]], vec![[0, 0, 0], [1, 0, 0]]), // dice 1.0
        ("b", vec![[0, 0, 0]], vec![[3, 3, 3]]),                       // dice 0.0
        ("c", vec![[0, 0, 0], [1, 0, 0]], vec![[1, 0, 0], [2, 0, 0]]), // dice 0.5
    ];
    for (id, truth, pred) in &cases {
        save_labels(truth_dir.join(format!("{id}_seg.nii.gz")), &make(truth))
            .map_err(|e| e.to_string())?;
        save_labels(pred_dir.join(format!("{id}.nii.gz")), &make(pred))
            .map_err(|e| e.to_string())?;
    }

    let output = Command::new(env!("CARGO_BIN_EXE_dimshrink"))
        .args(["evaluate", "--pred"])
        .arg(&pred_dir)
        .arg("--truth")
        .arg(&truth_dir)
        .arg("--output")
        .arg(&out_dir)
        .output()
        .map_err(|e| e.to_string())?;
    if !output.status.success() {
        return Err(format!(
            "evaluate failed: {}",
            String::from_utf8_lossy(&output.stderr)
        ));
    }
    let table = String::from_utf8_lossy(&output.stdout);
    for needle in ["ET", "WT", "TC", "Mean", "StdDev", "Median"] {
        if !table.contains(needle) {
            return Err(format!("table output missing {needle:?}:\n{table}"));
        }
    }

    // hand-computed statistics over sorted scores [0, 0.5, 1]
    let mean: f64 = (0.0 + 0.5 + 1.0) / 3.0;
    let std: f64 = ((0.25 + 0.0 + 0.25) / 3.0_f64).sqrt();
    let median: f64 = 0.5;
    let csv = std::fs::read_to_string(out_dir.join("summary.csv")).map_err(|e| e.to_string())?;
    let expect = format!(
        "statistic,et,wt,tc\nmean,{mean},{mean},{mean}\nstd,{std},{std},{std}\nmedian,{median},{median},{median}\n"
    );
    if csv != expect {
        return Err(format!("summary.csv:\n{csv}\nexpected:\n{expect}"));
    }
    Ok("exact to printed precision".into())
}

/// The published Table 2/3 numbers need the full dataset, long GPU
/// training and a retired evaluation platform; the README must say so and
/// carry the full-scale recipe as prose.
fn criterion_10() -> Result<String, String> {
    let readme_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../README.md");
    let readme = std::fs::read_to_string(&readme_path)
        .map_err(|e| format!("README.md missing: {e}"))?;
    for needle in ["65.37", "84.13", "68.04", "not reproducible", "reproduction recipe"] {
        if !readme.to_lowercase().contains(&needle.to_lowercase()) {
            return Err(format!("README.md lacks {needle:?}"));
        }
    }
    Ok("README documents the limitation and the full-scale recipe".into())
}
