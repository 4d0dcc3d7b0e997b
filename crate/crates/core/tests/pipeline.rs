use degenwave_core::analysis::{decay_certificate, energy_of};
use degenwave_core::config::SCENARIOS;
use degenwave_core::{channel_crosscheck, init_channel, make_delay, run, DelayKind, HistoryBuffer, RunConfig, Setup};

fn setup(name: &str, overrides: &[&str]) -> Setup {
    let mut c = RunConfig::scenario(name).unwrap();
    for o in overrides {
        c.apply_override(o).unwrap();
    }
    c.build().unwrap()
}

#[test]
fn every_scenario_keeps_the_sandwich_and_a_nonnegative_energy() {
    for (name, _) in SCENARIOS {
        let s = setup(name, &["integrator.t_end=2"]);
        let traj = run(&s).unwrap();
        let p = traj.params;
        for sample in &traj.samples {
            assert!(sample.e >= 0.0, "{name}");
            assert!(p.c4 * sample.e <= sample.e_tilde && sample.e_tilde <= p.c5 * sample.e, "{name} t = {}", sample.t);
        }
    }
}

#[test]
fn boundary_damping_alone_never_pumps_energy() {
    // mu2 = 0 on a degenerate coefficient, checked after every step
    let s = setup("nodelay", &["integrator.t_end=5"]);
    let traj = run(&s).unwrap();
    let e0 = traj.samples[0].e;
    let tol = 1e-10 * e0 + 1e-14;
    for w in traj.samples.windows(2) {
        assert!(w[1].e <= w[0].e + tol, "t = {}: {} -> {}", w[1].t, w[0].e, w[1].e);
    }
}

#[test]
fn zero_data_gives_zero_everything() {
    let s = setup("baseline", &["initial.preset=zero", "initial.f0=zero", "integrator.t_end=2"]);
    let traj = run(&s).unwrap();
    assert_eq!(channel_crosscheck(&traj.samples), 0.0);
    assert!(traj.samples.iter().all(|x| x.e == 0.0 && x.bc_residual == 0.0));
}

#[test]
fn constant_trace_is_exact_in_both_delay_realizations() {
    let delay = make_delay(DelayKind::SaturatingExponential { tau0: 0.5, tau1: 1.0, k: 0.4 }).unwrap();
    let (c, dt) = (0.37, 1e-3);
    let mut channel = init_channel(|_| c, delay.tau(0.0), 64).unwrap();
    let mut buffer = HistoryBuffer::new(delay.tau1 + 2.0 * dt);
    for k in (0..=600).rev() {
        buffer.push(-(k as f64) * dt, c).unwrap();
    }
    let mut worst = 0.0f64;
    for k in 1..=5000 {
        let (t0, t1) = ((k - 1) as f64 * dt, k as f64 * dt);
        channel.transport_step(delay.tau(t1), (delay.tau(t1) - delay.tau(t0)) / dt, dt, c);
        buffer.push(t1, c).unwrap();
        let delayed = buffer.sample(t1 - delay.tau(t1)).unwrap();
        worst = worst.max((channel.outflow() - delayed).abs());
    }
    assert!(worst <= 1e-12, "{worst}");
}

#[test]
fn runs_are_bitwise_reproducible() {
    let s = setup("baseline", &["integrator.t_end=3"]);
    let (a, b) = (run(&s).unwrap(), run(&s).unwrap());
    assert_eq!(a.samples, b.samples);
}

#[test]
fn snapshots_reproduce_the_recorded_energy() {
    let mut c = RunConfig::scenario("baseline").unwrap();
    for o in ["integrator.t_end=1", "integrator.record_every=50", "outputs.snapshots=snapshots.jsonl"] {
        c.apply_override(o).unwrap();
    }
    let s = c.build().unwrap();
    let traj = run(&s).unwrap();
    assert_eq!(traj.snapshots.len(), traj.samples.len());
    for (snap, sample) in traj.snapshots.iter().zip(&traj.samples) {
        let channel = degenwave_core::TransportChannel { w: snap.w.clone() };
        let e = energy_of(&snap.u, &snap.v, &channel, s.delay.tau(snap.t), &s.ops, &s.gains);
        assert!((e - sample.e).abs() <= 1e-12 * sample.e.abs().max(f64::MIN_POSITIVE), "{e} vs {}", sample.e);
    }
}

#[test]
fn time_reversed_decay_fails_the_envelope() {
    let s = setup("baseline", &["integrator.t_end=10", "integrator.record_every=10"]);
    let traj = run(&s).unwrap();
    let t: Vec<f64> = traj.samples.iter().map(|x| x.t).collect();
    let mut e: Vec<f64> = traj.samples.iter().map(|x| x.e).collect();
    e.reverse();
    // an envelope constant short enough that t >= M~ is inside the record
    let cert = decay_certificate(&t, &e, 2.0);
    assert!(!cert.envelope_ok, "{}", cert.envelope_ratio);
    e.reverse();
    assert!(decay_certificate(&t, &e, 2.0).envelope_ok);
}
