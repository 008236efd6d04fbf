//! The run loop: wires networks, gateways, and the overlay together over a
//! fixed tick grid, and the A/B harness that scores collaboration on and off.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::domain::centroid;
use crate::environment::Environment;
use crate::error::{Error, Result};
use crate::gateway::planner::PlanInputs;
use crate::gateway::Gateway;
use crate::metrics::{
    detection_latency, fmt_num, quality, Alert, NetworkCounters, RunMetrics, TimeseriesRow,
};
use crate::overlay::Overlay;
use crate::scenario::Scenario;
use crate::seed::derive_seed;
use crate::wsn::{energy_rate, NetworkConfig, NetworkState};

/// What a finished run hands back beyond the raw metrics.
#[derive(Debug)]
pub struct RunResult {
    pub metrics: RunMetrics,
    /// Configuration each network ended on.
    pub final_configs: BTreeMap<String, NetworkConfig>,
    /// Trust each gateway ended with, keyed gateway id then peer id.
    pub final_trust: BTreeMap<String, BTreeMap<String, f64>>,
}

/// Runs a scenario to completion. `seed_override` replaces the scenario's
/// seed, leaving the file untouched.
pub fn run(scenario: &Scenario, seed_override: Option<u64>) -> RunResult {
    let seed = seed_override.unwrap_or(scenario.seed);
    let env = Environment::new(scenario.fields.clone(), scenario.events.clone(), seed);
    let world = scenario.world;

    let mut nets: Vec<NetworkState> = Vec::with_capacity(scenario.networks.len());
    let mut egs: Vec<Gateway> = Vec::with_capacity(scenario.networks.len());
    for (net_spec, gw_spec) in scenario.networks.iter().zip(&scenario.gateways) {
        let initial = NetworkConfig {
            n_active: net_spec.nodes.len(),
            report_interval: gw_spec.params.planner.interval_set[0],
            alert_mode: false,
        };
        let rng = ChaCha8Rng::seed_from_u64(derive_seed(
            seed,
            &format!("network:{}", net_spec.id),
        ));
        let net = NetworkState::new(net_spec.clone(), initial, scenario.tick, rng)
            .expect("every declared node starts live");
        let local_types = net_spec
            .nodes
            .iter()
            .map(|n| n.sensor_type.clone())
            .collect();
        egs.push(Gateway::new(
            gw_spec.id.clone(),
            net_spec.id.clone(),
            local_types,
            gw_spec.params.clone(),
            scenario.coupling.clone(),
            scenario.relevance,
        ));
        nets.push(net);
    }

    let mut overlay = Overlay::new(
        egs.iter().map(|g| g.id.clone()).collect(),
        scenario.overlay_link,
        scenario.adjacency.clone(),
        |from, to| derive_seed(seed, &format!("overlay:{from}->{to}")),
    );

    let mut metrics = RunMetrics {
        network_ids: scenario.networks.iter().map(|n| n.id.clone()).collect(),
        grace: scenario.grace,
        ground_truth: env
            .ground_truth()
            .into_iter()
            .filter(|ev| ev.start < scenario.duration)
            .collect(),
        ..RunMetrics::default()
    };

    let mut current_q: Vec<f64> = (0..nets.len())
        .map(|i| {
            quality(
                &nets[i].active_footprint(),
                nets[i].config.report_interval,
                nets[i].link.pdr,
                &scenario.gateways[i].quality,
                &world,
            )
        })
        .collect();
    let mut current_p: Vec<f64> = vec![0.0; nets.len()];

    let ticks = (scenario.duration / scenario.tick).round() as u64;
    for tick_idx in 0..ticks {
        let t = tick_idx as f64 * scenario.tick;

        for (net, eg) in nets.iter_mut().zip(egs.iter_mut()) {
            let arrived = net.step(&env, t);
            eg.receive_reports(arrived);
        }

        for eg in egs.iter_mut() {
            for summary in overlay.drain(&eg.id, t) {
                eg.receive_summary(summary);
            }
        }

        for i in 0..egs.len() {
            let dp_ticks = (egs[i].params.decision_period / scenario.tick).round() as u64;
            if (tick_idx + 1) % dp_ticks != 0 {
                continue;
            }
            let warm = t < scenario.warm_up;
            let label = !env.active_event_ids(t).is_empty();
            let priority = nets[i].activation_priority();
            let own_centroid = centroid(&nets[i].live_positions()).ok();
            let outcome = {
                let inputs = (!priority.is_empty()).then_some(PlanInputs {
                    nodes: &priority,
                    energy: &nets[i].energy_model,
                    link: &nets[i].link,
                    quality: &scenario.gateways[i].quality,
                    world: &world,
                });
                egs[i].mape_tick(t, &nets[i].config, own_centroid, inputs.as_ref(), warm, label)
            };
            current_p[i] = outcome.p;
            if outcome.alert_started {
                metrics.alerts.push(Alert {
                    eg_id: egs[i].id.clone(),
                    network_id: nets[i].id.clone(),
                    t,
                });
            }
            if let Some(cfg) = outcome.new_config {
                nets[i]
                    .apply_config(cfg)
                    .expect("plans never exceed the live node count");
            }
            current_q[i] = quality(
                &nets[i].active_footprint(),
                nets[i].config.report_interval,
                nets[i].link.pdr,
                &scenario.gateways[i].quality,
                &world,
            );
            if scenario.collaboration {
                let eg_id = egs[i].id.clone();
                for summary in &outcome.summaries {
                    overlay.publish(&eg_id, summary, t);
                }
            }
        }

        for (i, net) in nets.iter().enumerate() {
            metrics.timeseries.push(TimeseriesRow {
                tick: tick_idx,
                network_id: net.id.clone(),
                power_w: energy_rate(&net.config, net.total_nodes(), &net.energy_model),
                energy_j: net.energy_consumed,
                q: current_q[i],
                p: current_p[i],
                n_active: net.config.n_active,
                report_interval: net.config.report_interval,
                alert: net.config.alert_mode,
            });
        }
    }

    metrics.dropped_summaries = overlay.dropped;
    for (net, eg) in nets.iter().zip(&egs) {
        metrics.counters.insert(
            net.id.clone(),
            NetworkCounters {
                accepted: eg.accepted_count,
                rejected: eg.rejected_count,
                reports_sent: net.reports_sent,
                reports_lost: net.reports_lost,
            },
        );
    }

    RunResult {
        final_configs: nets.iter().map(|n| (n.id.clone(), n.config)).collect(),
        final_trust: egs.iter().map(|g| (g.id.clone(), g.trust_table())).collect(),
        metrics,
    }
}

/// One line of the collaboration A/B table; `seed` is a number or "mean".
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub seed: String,
    pub network_id: String,
    pub energy_on: f64,
    pub energy_off: f64,
    pub energy_saving_pct: f64,
    pub latency_on: Option<f64>,
    pub latency_off: Option<f64>,
    pub misses_on: f64,
    pub misses_off: f64,
    pub false_alerts_on: f64,
    pub false_alerts_off: f64,
}

#[derive(Debug, Clone, Default)]
pub struct CompareReport {
    pub rows: Vec<CompareRow>,
}

fn mean_of(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Detection numbers for one network in one run: mean latency over the
/// events its gateway detected, how many it missed, and its false alerts.
fn network_score(metrics: &RunMetrics, network_id: &str) -> (Option<f64>, f64, f64) {
    let report = detection_latency(
        &metrics.ground_truth,
        &metrics.network_alerts(network_id),
        metrics.grace,
    );
    let latencies: Vec<f64> = report.events.iter().filter_map(|e| e.latency).collect();
    let misses = report.events.iter().filter(|e| e.latency.is_none()).count();
    (mean_of(&latencies), misses as f64, report.false_alerts as f64)
}

/// Runs every seed twice, collaboration on and off, and tabulates energy and
/// detection per network, closing with one mean row per network.
pub fn compare(scenario: &Scenario, seeds: &[u64]) -> CompareReport {
    let mut on_arm = scenario.clone();
    on_arm.collaboration = true;
    let mut off_arm = scenario.clone();
    off_arm.collaboration = false;

    let mut rows = Vec::new();
    for &seed in seeds {
        let on = run(&on_arm, Some(seed));
        let off = run(&off_arm, Some(seed));
        for id in &on.metrics.network_ids {
            let energy_on = on.metrics.total_energy(id);
            let energy_off = off.metrics.total_energy(id);
            let saving = if energy_off > 0.0 {
                (energy_off - energy_on) / energy_off * 100.0
            } else {
                0.0
            };
            let (latency_on, misses_on, false_on) = network_score(&on.metrics, id);
            let (latency_off, misses_off, false_off) = network_score(&off.metrics, id);
            rows.push(CompareRow {
                seed: seed.to_string(),
                network_id: id.clone(),
                energy_on,
                energy_off,
                energy_saving_pct: saving,
                latency_on,
                latency_off,
                misses_on,
                misses_off,
                false_alerts_on: false_on,
                false_alerts_off: false_off,
            });
        }
    }

    let network_ids: Vec<String> = scenario.networks.iter().map(|n| n.id.clone()).collect();
    let mut means = Vec::new();
    for id in &network_ids {
        let of_net: Vec<&CompareRow> = rows.iter().filter(|r| &r.network_id == id).collect();
        if of_net.is_empty() {
            continue;
        }
        let col = |f: fn(&CompareRow) -> f64| -> f64 {
            of_net.iter().map(|r| f(r)).sum::<f64>() / of_net.len() as f64
        };
        let lat = |f: fn(&CompareRow) -> Option<f64>| -> Option<f64> {
            let present: Vec<f64> = of_net.iter().filter_map(|r| f(r)).collect();
            mean_of(&present)
        };
        means.push(CompareRow {
            seed: "mean".to_string(),
            network_id: id.clone(),
            energy_on: col(|r| r.energy_on),
            energy_off: col(|r| r.energy_off),
            energy_saving_pct: col(|r| r.energy_saving_pct),
            latency_on: lat(|r| r.latency_on),
            latency_off: lat(|r| r.latency_off),
            misses_on: col(|r| r.misses_on),
            misses_off: col(|r| r.misses_off),
            false_alerts_on: col(|r| r.false_alerts_on),
            false_alerts_off: col(|r| r.false_alerts_off),
        });
    }
    rows.extend(means);
    CompareReport { rows }
}

/// Writes the A/B table; latency cells are empty when nothing was detected.
pub fn write_compare_csv(report: &CompareReport, path: &Path) -> Result<()> {
    let mut out = String::from(
        "seed,network_id,energy_on,energy_off,energy_saving_pct,latency_on,latency_off,\
         misses_on,misses_off,false_alerts_on,false_alerts_off\n",
    );
    for r in &report.rows {
        let opt = |v: Option<f64>| v.map(fmt_num).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.seed,
            r.network_id,
            fmt_num(r.energy_on),
            fmt_num(r.energy_off),
            fmt_num(r.energy_saving_pct),
            opt(r.latency_on),
            opt(r.latency_off),
            fmt_num(r.misses_on),
            fmt_num(r.misses_off),
            fmt_num(r.false_alerts_on),
            fmt_num(r.false_alerts_off),
        )
        .expect("writing to a String cannot fail");
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::emit_csv;
    use crate::scenario::parse_scenario;

    const QUIET: &str = r#"
        duration = 300.0
        seed = 42

        [world]
        width = 200.0
        height = 200.0

        [[fields]]
        sensor_type = "Temperature"
        baseline = 46.0
        noise_sigma = 0.3
        noise_corr_len = 40.0

        [[networks]]
        id = "net_a"
        sensor_sigma = 0.1

        [networks.energy]
        p_idle = 0.01
        p_sleep = 0.001
        e_sample = 0.05
        e_tx = 0.25

        [networks.link]
        pdr = 0.9
        latency = 0.0

        [[networks.nodes]]
        node_id = "a1"
        position = { x = 100.0, y = 100.0 }
        sensor_type = "Temperature"
        sensing_radius = 150.0
        battery = 5000.0

        [[networks.nodes]]
        node_id = "a2"
        position = { x = 90.0, y = 110.0 }
        sensor_type = "Temperature"
        sensing_radius = 150.0
        battery = 5000.0

        [[networks.nodes]]
        node_id = "a3"
        position = { x = 110.0, y = 90.0 }
        sensor_type = "Temperature"
        sensing_radius = 150.0
        battery = 5000.0

        [[networks.nodes]]
        node_id = "a4"
        position = { x = 95.0, y = 95.0 }
        sensor_type = "Temperature"
        sensing_radius = 150.0
        battery = 5000.0

        [[gateways]]
        id = "eg_a"
        network = "net_a"

        [gateways.filter.bounds.Temperature]
        value_min = -40.0
        value_max = 120.0
        max_rate = 50.0

        [gateways.thresholds.Temperature]
        theta_low = 45.0
        theta_high = 70.0

        [gateways.planner]
        app_type = "Monitoring"
    "#;

    fn timeseries_csv(result: &RunResult) -> String {
        let dir = tempfile::tempdir().unwrap();
        emit_csv(&result.metrics, dir.path()).unwrap();
        std::fs::read_to_string(dir.path().join("timeseries.csv")).unwrap()
    }

    #[test]
    fn same_seed_reproduces_byte_identical_output() {
        let s = parse_scenario(QUIET).unwrap();
        let a = timeseries_csv(&run(&s, Some(42)));
        let b = timeseries_csv(&run(&s, Some(42)));
        assert_eq!(a, b);
        let c = timeseries_csv(&run(&s, Some(43)));
        assert_ne!(a, c);
    }

    #[test]
    fn quiet_scenario_settles_on_cheap_plan() {
        let s = parse_scenario(QUIET).unwrap();
        let result = run(&s, None);
        let row = result
            .metrics
            .timeseries
            .iter()
            .find(|r| r.tick == 29)
            .unwrap();
        assert_eq!(row.n_active, 1);
        assert_eq!(row.report_interval, 30.0);
        assert!(!row.alert);
        let cfg = result.final_configs["net_a"];
        assert_eq!(cfg.n_active, 1);
        assert_eq!(cfg.report_interval, 30.0);
        assert!(result.metrics.alerts.is_empty());
    }

    #[test]
    fn zero_duration_yields_no_rows() {
        let text = QUIET.replace("duration = 300.0", "duration = 0.0");
        let s = parse_scenario(&text).unwrap();
        let result = run(&s, None);
        assert!(result.metrics.timeseries.is_empty());
        assert!(result.metrics.alerts.is_empty());
        assert!(result.metrics.ground_truth.is_empty());
    }

    #[test]
    fn warm_up_freezes_the_initial_configuration() {
        let text = QUIET.replace("seed = 42", "seed = 42\nwarm_up = 300.0");
        let s = parse_scenario(&text).unwrap();
        let result = run(&s, None);
        assert_eq!(result.metrics.timeseries.len(), 300);
        for row in &result.metrics.timeseries {
            assert_eq!(row.n_active, 4, "tick {}", row.tick);
            assert_eq!(row.report_interval, 10.0, "tick {}", row.tick);
        }
    }

    const TWO_NETS: &str = r#"
        duration = 240.0
        seed = 7
        collaboration = false

        [world]
        width = 400.0
        height = 200.0

        [[fields]]
        sensor_type = "Temperature"
        baseline = 46.0
        noise_sigma = 0.3
        noise_corr_len = 40.0

        [[fields]]
        sensor_type = "CO2"
        baseline = 400.0
        noise_sigma = 5.0
        noise_corr_len = 40.0

        [coupling]
        pairs = [{ a = "Temperature", b = "CO2", k = 0.7 }]

        [[networks]]
        id = "net_a"
        sensor_sigma = 0.1

        [networks.energy]
        p_idle = 0.01
        p_sleep = 0.001
        e_sample = 0.05
        e_tx = 0.25

        [networks.link]
        pdr = 0.95
        latency = 1.0

        [[networks.nodes]]
        node_id = "a1"
        position = { x = 100.0, y = 100.0 }
        sensor_type = "Temperature"
        sensing_radius = 150.0
        battery = 5000.0

        [[networks.nodes]]
        node_id = "a2"
        position = { x = 120.0, y = 90.0 }
        sensor_type = "Temperature"
        sensing_radius = 150.0
        battery = 5000.0

        [[networks.nodes]]
        node_id = "a3"
        position = { x = 80.0, y = 110.0 }
        sensor_type = "Temperature"
        sensing_radius = 150.0
        battery = 5000.0

        [[gateways]]
        id = "eg_a"
        network = "net_a"

        [gateways.filter.bounds.Temperature]
        value_min = -40.0
        value_max = 120.0
        max_rate = 50.0

        [gateways.thresholds.Temperature]
        theta_low = 45.0
        theta_high = 70.0

        [gateways.planner]
        app_type = "Monitoring"

        [[networks]]
        id = "net_b"
        sensor_sigma = 1.0

        [networks.energy]
        p_idle = 0.012
        p_sleep = 0.0015
        e_sample = 0.06
        e_tx = 0.3

        [networks.link]
        pdr = 1.0
        latency = 0.0

        [[networks.nodes]]
        node_id = "b1"
        position = { x = 300.0, y = 100.0 }
        sensor_type = "CO2"
        sensing_radius = 160.0
        battery = 4000.0

        [[networks.nodes]]
        node_id = "b2"
        position = { x = 320.0, y = 90.0 }
        sensor_type = "CO2"
        sensing_radius = 160.0
        battery = 4000.0

        [[gateways]]
        id = "eg_b"
        network = "net_b"

        [gateways.filter.bounds.CO2]
        value_min = 0.0
        value_max = 5000.0
        max_rate = 500.0

        [gateways.thresholds.CO2]
        theta_low = 800.0
        theta_high = 2000.0

        [gateways.planner]
        app_type = "EventDriven"
    "#;

    #[test]
    fn without_collaboration_each_network_runs_as_if_alone() {
        let both = parse_scenario(TWO_NETS).unwrap();
        let with_both = run(&both, Some(7));

        let start = TWO_NETS.find("[[networks]]\n        id = \"net_b\"").unwrap();
        let alone = parse_scenario(&TWO_NETS[..start]).unwrap();
        let with_one = run(&alone, Some(7));

        let rows_of = |result: &RunResult, id: &str| -> Vec<String> {
            result
                .metrics
                .timeseries
                .iter()
                .filter(|r| r.network_id == id)
                .map(|r| {
                    format!(
                        "{},{},{},{},{},{},{}",
                        r.tick,
                        fmt_num(r.power_w),
                        fmt_num(r.energy_j),
                        fmt_num(r.q),
                        fmt_num(r.p),
                        r.n_active,
                        fmt_num(r.report_interval)
                    )
                })
                .collect()
        };
        assert_eq!(rows_of(&with_both, "net_a"), rows_of(&with_one, "net_a"));
        assert_eq!(
            with_both.metrics.counters["net_a"],
            with_one.metrics.counters["net_a"]
        );
    }

    #[test]
    fn event_raises_alert_and_alert_mode() {
        let text = QUIET
            .replace(
                "[[networks]]",
                r#"
                [[events]]
                start = 60.0
                duration = 120.0
                center = { x = 100.0, y = 100.0 }
                radius = 200.0

                [events.intensity]
                Temperature = 60.0

                [[networks]]
                "#,
            )
            .replace("app_type = \"Monitoring\"", "app_type = \"EventDriven\"")
            .replace(
                "max_rate = 50.0",
                "max_rate = 50.0\n\n        [gateways.filter]\n        z_max = 1000.0",
            );
        let s = parse_scenario(&text).unwrap();
        let result = run(&s, None);

        assert_eq!(result.metrics.alerts.len(), 1);
        let alert = &result.metrics.alerts[0];
        assert_eq!(alert.eg_id, "eg_a");
        assert_eq!(alert.network_id, "net_a");
        assert_eq!(alert.t, 89.0);

        let report = detection_latency(
            &result.metrics.ground_truth,
            &result.metrics.network_alerts("net_a"),
            result.metrics.grace,
        );
        assert_eq!(report.events.len(), 1);
        assert_eq!(report.events[0].latency, Some(29.0));
        assert_eq!(report.false_alerts, 0);

        let row = result
            .metrics
            .timeseries
            .iter()
            .find(|r| r.tick == 89)
            .unwrap();
        assert!(row.alert);
        assert_eq!(row.report_interval, 10.0);
        assert!(row.n_active >= 2);
    }

    #[test]
    fn compare_tabulates_per_seed_and_mean_rows() {
        let s = parse_scenario(TWO_NETS).unwrap();
        let report = compare(&s, &[1, 2]);
        assert_eq!(report.rows.len(), 2 * 2 + 2);
        let mean_rows: Vec<&CompareRow> =
            report.rows.iter().filter(|r| r.seed == "mean").collect();
        assert_eq!(mean_rows.len(), 2);
        for row in &report.rows {
            assert!(row.energy_on > 0.0);
            assert!(row.energy_off > 0.0);
        }

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("compare.csv");
        write_compare_csv(&report, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1 + 6);
        assert!(text.starts_with("seed,network_id,"));
        assert!(text.contains("\nmean,net_a,"));
    }
}

