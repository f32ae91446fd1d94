use fastsim_core::scenario::run_scenario_text;
fn theta_scenario(n: usize, theta: f64, seed: u64) -> String {
    let mut text = String::from("topology.kind=dumbbell\ntopology.bottleneck_rate=100e6\nduration=20\n");
    text.push_str(&format!("seed={seed}\n"));
    for i in 0..n {
        text.push_str(&format!(
            "flow.{i}.alpha=50\nflow.{i}.oracle_base_rtt=true\nflow.{i}.start_time={}\nflow.{i}.start_jitter=0.3\nflow.{i}.access_delay={}\n",
            0.7 * i as f64, 1e-3 + 0.05e-3 * i as f64));
    }
    text.push_str(&format!("flow.{n}.alpha=50\nflow.{n}.start_time=8\nflow.{n}.start_jitter=1\nflow.{n}.remedy=delay_probe\nflow.{n}.remedy.theta={theta}\nflow.{n}.remedy.max_retries=0\n"));
    text
}
#[test]
fn grid() {
    for n in [2usize, 4, 8] {
        for theta in [-0.7, -0.5, -0.3, -0.1, 0.1, 0.3, 0.5, 0.7, -0.05, 0.05] {
            let mut hits = 0;
            let mut worst: f64 = 0.0;
            for rep in 0..10u64 {
                let log = run_scenario_text(&theta_scenario(n, theta, 300 + 17 * rep)).unwrap();
                match log.probes.first().and_then(|p| p.n_hat) {
                    Some(nh) => {
                        if (nh.round() - n as f64).abs() <= 1.0 { hits += 1; }
                        worst = worst.max((nh - n as f64).abs());
                    }
                    None => worst = f64::INFINITY,
                }
            }
            println!("n={n} theta={theta:+.2}: hits {hits}/10 worst={worst:.2}");
        }
    }
}
