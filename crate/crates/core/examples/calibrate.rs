//! Convergence diagnostic: runs the same Adam loop as `train` on a Lorenz
//! dataset but reports the hidden-state RMSE at regular checkpoints, so the
//! step budget needed for a target accuracy can be read off one run.
//!
//! Usage: calibrate <n_units> <max_steps> [checkpoint_every] [seed] [snr_db]
//!
//! The reservoir/readout seeds match `pi-esn train --size <n_units>` with the
//! default master seed (single-size grid, cell index 0, clean data).

use nalgebra::DMatrix;
use pi_esn::harness::rmse;
use pi_esn::seeds::{cell_seed, mix, noise_seed};
use pi_esn::training::{loss_and_gradient_t, prepare_training_arrays};
use pi_esn::{
    add_noise, generate_dataset, init_readout, Lorenz, Reservoir, ReservoirConfig, TrainConfig,
};

fn main() {
    let mut args = std::env::args().skip(1);
    let n_units: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(600);
    let max_steps: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(100_000);
    let every: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(5_000);
    let master: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(42);
    let snr_db: Option<f64> = args.next().and_then(|s| s.parse().ok());

    let model = Lorenz::default();
    let mut ds = generate_dataset(&model, &[-10.0, -4.45, 35.1], 0.01, 20_000, 1000).unwrap();
    if let Some(db) = snr_db {
        ds = add_noise(&ds, db, noise_seed(master, 1)).unwrap();
    }
    let noise_idx = usize::from(snr_db.is_some());
    let seed = cell_seed(master, 0, noise_idx);

    let config = TrainConfig {
        seed: mix(seed, 2),
        max_steps,
        ..TrainConfig::default()
    };
    let res = Reservoir::build(ReservoirConfig {
        n_units,
        input_dim: 2,
        seed: mix(seed, 1),
        ..ReservoirConfig::new(n_units, 2, 0)
    })
    .unwrap();

    let (features, targets) = prepare_training_arrays(&res, &ds, config.washout).unwrap();
    let features_t = features.transpose();
    let m = features.nrows();
    let h_ref: Vec<f64> = ds
        .clean_full
        .rows(config.washout + 1, m)
        .column(2)
        .iter()
        .copied()
        .collect();
    let mean = h_ref.iter().sum::<f64>() / m as f64;
    let std3 = (h_ref.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m as f64).sqrt();

    let mut readout = init_readout(&features, &targets, &config, 1).unwrap();
    let shape = readout.w_out.shape();
    let mut m1: DMatrix<f64> = DMatrix::zeros(shape.0, shape.1);
    let mut m2: DMatrix<f64> = DMatrix::zeros(shape.0, shape.1);
    let (b1, b2) = (config.adam_beta1, config.adam_beta2);

    println!("n_units={n_units} seed={seed} std_phi3={std3:.4}");
    println!("step,e_d,e_p,e_tot,rmse_hidden,nrmse");
    let t0 = std::time::Instant::now();
    for step in 0..=max_steps {
        if step % every == 0 || step == max_steps {
            let (report, _) =
                loss_and_gradient_t(&readout, &features_t, &targets, ds.dt, &model, false).unwrap();
            let yhat = readout.outputs(&features).unwrap();
            let h_pred: Vec<f64> = yhat.column(2).iter().copied().collect();
            let r = rmse(&h_pred, &h_ref).unwrap();
            println!(
                "{step},{:.6e},{:.6e},{:.6e},{:.6},{:.4}  [{:.0}s]",
                report.e_d,
                report.e_p,
                report.e_tot,
                r,
                r / std3,
                t0.elapsed().as_secs_f64()
            );
        }
        if step == max_steps {
            break;
        }
        let grad = loss_and_gradient_t(&readout, &features_t, &targets, ds.dt, &model, true)
            .unwrap()
            .1
            .unwrap();
        let t = (step + 1) as f64;
        let bc1 = 1.0 - b1.powf(t);
        let bc2 = 1.0 - b2.powf(t);
        for (i, g) in grad.iter().enumerate() {
            m1[i] = b1 * m1[i] + (1.0 - b1) * g;
            m2[i] = b2 * m2[i] + (1.0 - b2) * g * g;
            let vh: f64 = m2[i] / bc2;
            readout.w_out[i] -=
                config.learning_rate * (m1[i] / bc1) / (vh.sqrt() + config.adam_epsilon);
        }
    }
}
