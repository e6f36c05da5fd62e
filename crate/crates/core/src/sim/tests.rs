use super::*;
use crate::bianchi::{durations_at_rate, solve_fixed_point};
use crate::config::ConfigFile;
use proptest::prelude::*;

fn cfg(n: usize, l: usize, mode: TxMode) -> NetworkConfig {
    let mut file = ConfigFile::with_size(n, l);
    file.tx_mode = mode;
    file.resolve().unwrap()
}

fn uniform(cfg: &NetworkConfig, w0: u32) -> (PolicyMatrix, IcwMatrix) {
    (
        PolicyMatrix::uniform(cfg.num_stas, cfg.num_links()),
        IcwMatrix::constant(cfg, w0).unwrap(),
    )
}

#[test]
fn single_station_never_collides_and_matches_closed_form() {
    let c = cfg(1, 1, TxMode::Gated);
    let (beta, icw) = uniform(&c, 16);
    let ch = ChannelRealization::fixed_rate(1, 1, 100.0);
    let mut sim = Simulator::new(&c, 3);
    let steps = 50;
    let mut total = 0.0;
    for _ in 0..steps {
        let (_, m) = sim.run_step(&beta, &icw, &ch, 20_000);
        assert_eq!(m.collisions, 0);
        total += m.total_throughput();
    }
    let (t_su, _) = durations_at_rate(&c.timing, 100.0);
    let closed = 12000.0 / (7.5 * 9.0 + t_su);
    let mean = total / steps as f64;
    assert!((mean - closed).abs() / closed < 0.02, "{mean} vs {closed}");
}

#[test]
fn unallocated_link_stays_silent() {
    let c = cfg(4, 2, TxMode::Gated);
    let beta = PolicyMatrix::symmetric(4, &[1.0, 0.0]).unwrap();
    let icw = IcwMatrix::constant(&c, 16).unwrap();
    let ch = ChannelRealization::fixed_rate(4, 2, 100.0);
    let (obs, m) = run_step(&c, &beta, &icw, &ch, 20_000, 9);
    assert_eq!(m.busy_frac[1], 0.0);
    assert_eq!(m.thr_link_mbps[1], 0.0);
    assert!(m.thr_link_mbps[0] > 0.0);
    assert!(obs.u.column(1).iter().all(|&u| u == 0.0));
}

#[test]
fn same_seed_same_metrics() {
    for mode in [TxMode::Gated, TxMode::QueueDraw] {
        let c = cfg(5, 2, mode);
        let (beta, icw) = uniform(&c, 32);
        let ch = ChannelRealization::fixed_rate(5, 2, 150.0);
        let a = run_step(&c, &beta, &icw, &ch, 20_000, 42);
        let b = run_step(&c, &beta, &icw, &ch, 20_000, 42);
        assert_eq!(a, b);
        let other = run_step(&c, &beta, &icw, &ch, 20_000, 43);
        assert_ne!(a.1, other.1);
    }
}

#[test]
fn observation_rows_share_busy_fraction() {
    let c = cfg(3, 2, TxMode::Gated);
    let (beta, icw) = uniform(&c, 16);
    let ch = ChannelRealization::fixed_rate(3, 2, 100.0);
    let (obs, m) = run_step(&c, &beta, &icw, &ch, 20_000, 1);
    for sta in 0..3 {
        assert_eq!(obs.u.row(sta), &m.busy_frac[..]);
    }
    assert_eq!(obs.g, ch.snr_db);
}

#[test]
fn gated_transmission_rate_matches_tau() {
    let c = cfg(5, 2, TxMode::Gated);
    let beta = PolicyMatrix::symmetric(5, &[0.3, 0.7]).unwrap();
    let icw = IcwMatrix::constant(&c, 16).unwrap();
    let ch = ChannelRealization::fixed_rate(5, 2, 100.0);
    let mut sim = Simulator::new(&c, 17);
    sim.run_step(&beta, &icw, &ch, 5_000_000);
    let sol = solve_fixed_point(&c, &beta, &icw, &ch.rate_mbps).unwrap();
    for link in 0..2 {
        let counters = sim.link_counters(link);
        for sta in 0..5 {
            let emp = counters.tx_rate(sta);
            let tau = sol.tau[(sta, link)];
            assert!((emp - tau).abs() / tau < 0.10, "link {link} sta {sta}: {emp} vs {tau}");
        }
    }
}

#[test]
fn queue_draw_splits_deliveries_by_beta() {
    let c = cfg(4, 2, TxMode::QueueDraw);
    let beta = PolicyMatrix::symmetric(4, &[0.25, 0.75]).unwrap();
    let icw = IcwMatrix::constant(&c, 16).unwrap();
    let ch = ChannelRealization::fixed_rate(4, 2, 100.0);
    let mut sim = Simulator::new(&c, 5);
    let (_, m) = sim.run_step(&beta, &icw, &ch, 2_000_000);
    let share = m.thr_link_mbps[0] / m.total_throughput();
    assert!((share - 0.25).abs() < 0.03, "{share}");
    assert!(m.successes > 1000);
}

#[test]
fn carries_state_across_steps_and_icw_changes() {
    let c = cfg(3, 1, TxMode::Gated);
    let beta = PolicyMatrix::uniform(3, 1);
    let big = IcwMatrix::constant(&c, 512).unwrap();
    let small = IcwMatrix::constant(&c, 16).unwrap();
    let ch = ChannelRealization::fixed_rate(3, 1, 100.0);
    let mut sim = Simulator::new(&c, 8);
    for step in 0..20 {
        let icw = if step % 2 == 0 { &big } else { &small };
        let (_, m) = sim.run_step(&beta, icw, &ch, 1_000);
        assert_eq!(m.busy_ns[0] + m.idle_ns[0], 1_000_000);
        for sta in 0..3 {
            let st = sim.state(sta, 0);
            assert!(st.counter < st.cw);
            assert_eq!(st.cw, icw.get(sta, 0) << st.stage);
        }
    }
    assert_eq!(sim.clock_ns(), 20_000_000);
}

#[test]
fn trace_records_events() {
    let c = cfg(3, 1, TxMode::Gated);
    let (beta, icw) = uniform(&c, 16);
    let ch = ChannelRealization::fixed_rate(3, 1, 100.0);
    let mut sim = Simulator::new(&c, 2);
    sim.enable_trace();
    let (_, m) = sim.run_step(&beta, &icw, &ch, 20_000);
    let trace = sim.take_trace();
    let successes = trace.iter().filter(|e| e.event == TraceKind::Success).count() as u64;
    assert_eq!(successes, m.successes);
    assert!(trace.iter().any(|e| e.event == TraceKind::Freeze));
    assert!(trace.windows(2).all(|w| w[0].timestamp_us <= w[1].timestamp_us + 1e-9 || w[0].link != w[1].link));
    assert!(sim.take_trace().is_empty());
}

#[test]
fn access_delay_tracks_contention_free_cycle() {
    let c = cfg(1, 1, TxMode::Gated);
    let (beta, icw) = uniform(&c, 16);
    let ch = ChannelRealization::fixed_rate(1, 1, 100.0);
    let (_, m) = run_step(&c, &beta, &icw, &ch, 2_000_000, 4);
    let (t_su, _) = durations_at_rate(&c.timing, 100.0);
    let expected = 7.5 * 9.0 + t_su;
    let delay = m.access_delay_us.unwrap();
    assert!((delay - expected).abs() / expected < 0.02, "{delay} vs {expected}");
}

#[test]
fn delay_absent_when_nothing_delivered() {
    let c = cfg(2, 2, TxMode::Gated);
    let beta = PolicyMatrix::symmetric(2, &[1.0, 0.0]).unwrap();
    let icw = IcwMatrix::constant(&c, 16).unwrap();
    let ch = ChannelRealization::fixed_rate(2, 2, 100.0);
    // shorter than one slot: nothing can complete
    let (_, m) = run_step(&c, &beta, &icw, &ch, 5, 1);
    assert_eq!(m.successes, 0);
    assert_eq!(m.access_delay_us, None);
    assert!(m.jain_vacuous);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn time_is_conserved_and_throughput_adds_up(
        seed in 0u64..1000,
        n in 1usize..6,
        split in 0.0f64..=1.0,
        w0 in 16u32..=256,
        queue in any::<bool>(),
        duration_us in 1u64..30_000,
    ) {
        let mode = if queue { TxMode::QueueDraw } else { TxMode::Gated };
        let c = cfg(n, 2, mode);
        let beta = PolicyMatrix::symmetric(n, &[split, 1.0 - split]).unwrap();
        let icw = IcwMatrix::constant(&c, w0).unwrap();
        let ch = ChannelRealization {
            snr_db: Matrix::filled(n, 2, 20.0),
            rate_mbps: Matrix::from_fn(n, 2, |r, l| 50.0 * (1 + r + l) as f64),
        };
        let mut sim = Simulator::new(&c, seed);
        for _ in 0..3 {
            let (_, m) = sim.run_step(&beta, &icw, &ch, duration_us);
            for link in 0..2 {
                prop_assert_eq!(m.busy_ns[link] + m.idle_ns[link], duration_us * 1000);
                prop_assert!((0.0..=1.0).contains(&m.busy_frac[link]));
            }
            let by_sta: f64 = m.thr_sta_mbps.iter().sum();
            prop_assert!((by_sta - m.total_throughput()).abs() <= 1e-9 * by_sta.max(1.0));
            prop_assert!(m.jain >= 1.0 / n as f64 - 1e-12 && m.jain <= 1.0 + 1e-12);
        }
    }
}
