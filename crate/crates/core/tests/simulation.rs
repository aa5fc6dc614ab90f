use mltcp_sim::metrics::{self, REPORT_FILES};
use mltcp_sim::scenario::Scenario;
use mltcp_sim::sim;

fn scenario(extra_cc: &str, queue: &str, jobs: usize, iterations: u32) -> Scenario {
    let mut text = format!(
        r#"
        seed = 4
        [topology]
        kind = "dumbbell"
        [topology.queue]
        {queue}
        [cc]
        {extra_cc}
        "#
    );
    for _ in 0..jobs {
        text.push_str(&format!("[[jobs]]\nperiod = \"4ms\"\nduty_cycle = 0.4\niterations = {iterations}\n"));
    }
    Scenario::parse(&text).unwrap()
}

fn reno(variant: &str) -> String {
    format!("algorithm = \"reno\"\nvariant = \"{variant}\"")
}

#[test]
fn lone_job_runs_near_isolation_time_without_loss() {
    let sc = scenario(&reno("base"), "capacity = \"45KB\"", 1, 10);
    let report = sim::run(&sc);
    assert!(!report.truncated);
    assert_eq!(report.total_drops(), 0);
    let iso = report.jobs[0].isolation_time.as_secs_f64();
    for d in metrics::durations(&report, 0) {
        assert!(d >= iso * 0.99 && d <= iso * 1.10, "iteration {d} s vs isolation {iso} s");
    }
}

#[test]
fn lossless_queues_never_drop() {
    let queue = "capacity = \"200KB\"\nmode = \"ecn\"\npause_threshold = \"100KB\"";
    let sc = scenario("algorithm = \"dcqcn\"", queue, 3, 8);
    let report = sim::run(&sc);
    assert!(!report.truncated);
    assert_eq!(report.total_drops(), 0);
    assert!(report.total_marks() > 0);
}

#[test]
fn every_nic_limit_completes() {
    for limit in [1, 2, 64] {
        let sc = scenario(&format!("{}\nnic_queue_limit = {limit}", reno("mltcp-wi")), "capacity = \"45KB\"", 2, 8);
        let report = sim::run(&sc);
        assert!(!report.truncated, "limit {limit}");
        assert!(report.jobs.iter().all(|j| j.iterations.len() == 8), "limit {limit}");
    }
}

#[test]
fn seed_controls_the_run() {
    let sc = scenario(&reno("mltcp-wi"), "capacity = \"45KB\"", 2, 8);
    let a = sim::run(&sc);
    assert_eq!(a, sim::run(&sc));
    let mut other = sc.clone();
    other.spec.seed = 5;
    assert_ne!(a.jobs[0].iterations, sim::run(&other).jobs[0].iterations);
}

#[test]
fn report_rows_match_the_run() {
    let sc = scenario(&reno("mltcp-wi"), "capacity = \"45KB\"", 2, 6);
    let report = sim::run(&sc);
    let dir = tempfile::tempdir().unwrap();
    metrics::write_report(&report, dir.path()).unwrap();
    let rows = |file: &str| std::fs::read_to_string(dir.path().join(file)).unwrap().lines().count() - 1;

    assert_eq!(rows(REPORT_FILES[0]), 2 * 6);
    let seconds = (report.end_time.as_nanos() / 1_000_000_000 + 1) as usize;
    assert_eq!(rows(REPORT_FILES[1]), report.links.len() * seconds);
    let busy: usize =
        report.monitored().flat_map(|l| l.output_bins.iter()).map(|bins| bins.iter().filter(|&&b| b > 0).count()).sum();
    assert_eq!(rows(REPORT_FILES[2]), busy);
    assert_eq!(rows(REPORT_FILES[3]), 2);

    let delivered: u64 = report.jobs.iter().flat_map(|j| &j.iterations).map(|r| r.bytes_delivered).sum();
    let carried: u64 = report.monitored().flat_map(|l| l.output_bins.iter()).flatten().sum();
    assert!(carried >= delivered, "bottleneck carried {carried} bytes for {delivered} delivered");
}
