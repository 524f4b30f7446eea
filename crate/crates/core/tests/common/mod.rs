//! Independent reference implementations shared by the integration tests
//! and the acceptance harness.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::net::IpAddr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wfkit::capture::{PacketRecord, TcpFlags, Transport};
use wfkit::dataset::{LabeledDataset, Row, Task};
use wfkit::eval::{stratified_folds, Grid};
use wfkit::flow::{Flow, FlowConfig, FlowKey, Endpoint, Termination};
use wfkit::learners::{fit, ClassifierSpec, HyperValue};

// ---------------------------------------------------------------- flows

/// A random packet trace over a handful of endpoints so that keys collide,
/// with gaps that straddle 1 s and 120 s, duplicate timestamps, a few
/// out-of-order records and random TCP control flags.
pub fn random_trace(seed: u64, n: usize) -> Vec<PacketRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hosts: [IpAddr; 5] = [
        "10.0.0.1".parse().unwrap(),
        "10.0.0.2".parse().unwrap(),
        "192.0.2.7".parse().unwrap(),
        "2001:db8::1".parse().unwrap(),
        "2001:db8::2".parse().unwrap(),
    ];
    let ports = [443u16, 80, 50000];
    let mut t = 1_700_000_000.0;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        t += match rng.random_range(0..100) {
            0..=9 => 0.0,
            10..=79 => rng.random_range(0.0..0.5),
            80..=96 => rng.random_range(0.5..3.0),
            _ => rng.random_range(100.0..200.0),
        };
        let ts = if rng.random_bool(0.03) { t - rng.random_range(0.0..2.0) } else { t };
        let v6 = rng.random_bool(0.3);
        let pick = |rng: &mut ChaCha8Rng| if v6 { hosts[rng.random_range(3..5)] } else { hosts[rng.random_range(0..3)] };
        let src = pick(&mut rng);
        let dst = pick(&mut rng);
        let transport = match rng.random_range(0..100) {
            0..=69 => Transport::Tcp,
            70..=94 => Transport::Udp,
            _ => Transport::Other,
        };
        let tcp_flags = (transport == Transport::Tcp).then(|| {
            let mut f = TcpFlags::ACK;
            if rng.random_bool(0.1) {
                f |= TcpFlags::SYN;
            }
            if rng.random_bool(0.12) {
                f |= TcpFlags::FIN;
            }
            if rng.random_bool(0.03) {
                f |= TcpFlags::RST;
            }
            f
        });
        let (src_port, dst_port) = if transport == Transport::Other {
            (0, 0)
        } else {
            (ports[rng.random_range(0..3)], ports[rng.random_range(0..3)])
        };
        let wire_len = rng.random_range(54..1515);
        out.push(PacketRecord {
            timestamp: ts,
            src_addr: src,
            dst_addr: dst,
            src_port,
            dst_port,
            transport,
            wire_len,
            payload_len: wire_len - 54,
            tcp_flags,
        });
    }
    out
}

struct OracleFlow {
    key: (Endpoint, Endpoint, Transport),
    packets: Vec<usize>,
    closed: Option<Termination>,
}

/// Brute-force flow assembly: every packet scans all flows built so far
/// for an open one with the same unordered endpoint pair, and counters are
/// recomputed from the member packets at the end.
pub fn oracle_flows(packets: &[PacketRecord], config: FlowConfig) -> Vec<Flow> {
    let mut order: Vec<usize> = (0..packets.len()).collect();
    order.sort_by(|&i, &j| packets[i].timestamp.partial_cmp(&packets[j].timestamp).unwrap());
    let mut flows: Vec<OracleFlow> = Vec::new();
    for &i in &order {
        let p = &packets[i];
        if p.transport == Transport::Other {
            continue;
        }
        let s = Endpoint {
            addr: p.src_addr,
            port: p.src_port,
        };
        let d = Endpoint {
            addr: p.dst_addr,
            port: p.dst_port,
        };
        let key = (s.min(d), s.max(d), p.transport);
        let mut slot = flows.iter().position(|f| f.key == key && f.closed.is_none());
        if let Some(k) = slot {
            let times: Vec<f64> = flows[k].packets.iter().map(|&j| packets[j].timestamp).collect();
            let first = times.iter().cloned().fold(f64::INFINITY, f64::min);
            let last = times.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if p.timestamp - last > config.idle_timeout {
                flows[k].closed = Some(Termination::IdleTimeout);
                slot = None;
            } else if p.timestamp - first > config.active_timeout {
                flows[k].closed = Some(Termination::ActiveTimeout);
                slot = None;
            }
        }
        let k = match slot {
            Some(k) => k,
            None => {
                flows.push(OracleFlow {
                    key,
                    packets: Vec::new(),
                    closed: None,
                });
                flows.len() - 1
            }
        };
        flows[k].packets.push(i);
        if config.honor_tcp_close && p.transport == Transport::Tcp {
            let f = &flows[k];
            let init = &packets[f.packets[0]];
            let fin_from = |fwd: bool| {
                f.packets.iter().any(|&j| {
                    let q = &packets[j];
                    let is_fwd = q.src_addr == init.src_addr && q.src_port == init.src_port;
                    is_fwd == fwd && q.tcp_flags.unwrap().contains(TcpFlags::FIN)
                })
            };
            if p.tcp_flags.unwrap().contains(TcpFlags::RST) || (fin_from(true) && fin_from(false)) {
                flows[k].closed = Some(Termination::TcpClose);
            }
        }
    }
    flows
        .into_iter()
        .map(|f| {
            let init = &packets[f.packets[0]];
            let initiator = Endpoint {
                addr: init.src_addr,
                port: init.src_port,
            };
            let mut flow = Flow {
                key: FlowKey {
                    a: f.key.0,
                    b: f.key.1,
                    transport: f.key.2,
                },
                initiator,
                first_ts: f64::INFINITY,
                last_ts: f64::NEG_INFINITY,
                fwd_packets: 0,
                bwd_packets: 0,
                fwd_bytes: 0,
                bwd_bytes: 0,
                fwd_payload_bytes: 0,
                bwd_payload_bytes: 0,
                termination: f.closed.unwrap_or(Termination::EndOfCapture),
            };
            for &j in &f.packets {
                let q = &packets[j];
                flow.first_ts = flow.first_ts.min(q.timestamp);
                flow.last_ts = flow.last_ts.max(q.timestamp);
                if q.src_addr == initiator.addr && q.src_port == initiator.port {
                    flow.fwd_packets += 1;
                    flow.fwd_bytes += u64::from(q.wire_len);
                    flow.fwd_payload_bytes += u64::from(q.payload_len);
                } else {
                    flow.bwd_packets += 1;
                    flow.bwd_bytes += u64::from(q.wire_len);
                    flow.bwd_payload_bytes += u64::from(q.payload_len);
                }
            }
            flow
        })
        .collect()
}

/// Flows in a canonical order, for multiset comparison.
pub fn canonical(mut flows: Vec<Flow>) -> Vec<Flow> {
    flows.sort_by(|x, y| {
        x.first_ts
            .total_cmp(&y.first_ts)
            .then(x.key.cmp(&y.key))
            .then(x.last_ts.total_cmp(&y.last_ts))
            .then(x.fwd_packets.cmp(&y.fwd_packets))
            .then(x.bwd_packets.cmp(&y.bwd_packets))
    });
    flows
}

// -------------------------------------------------------------- metrics

/// Precision, recall and F1 of every class, computed cell by cell from a
/// confusion matrix `m[truth][predicted]`.
pub struct OracleMetrics {
    pub accuracy: f64,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub f1: Vec<f64>,
    pub support: Vec<f64>,
}

fn ratio(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else {
        a / b
    }
}

pub fn oracle_metrics(m: &[Vec<u64>]) -> OracleMetrics {
    let k = m.len();
    let mut total = 0.0;
    let mut diagonal = 0.0;
    let mut o = OracleMetrics {
        accuracy: 0.0,
        precision: vec![0.0; k],
        recall: vec![0.0; k],
        f1: vec![0.0; k],
        support: vec![0.0; k],
    };
    for c in 0..k {
        let tp = m[c][c] as f64;
        let mut row = 0.0;
        let mut col = 0.0;
        for j in 0..k {
            row += m[c][j] as f64;
            col += m[j][c] as f64;
            total += m[c][j] as f64;
        }
        diagonal += tp;
        o.support[c] = row;
        o.precision[c] = ratio(tp, col);
        o.recall[c] = ratio(tp, row);
        o.f1[c] = ratio(2.0 * o.precision[c] * o.recall[c], o.precision[c] + o.recall[c]);
    }
    o.accuracy = ratio(diagonal, total);
    o
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn weighted(v: &[f64], w: &[f64]) -> f64 {
    ratio(v.iter().zip(w).map(|(a, b)| a * b).sum(), w.iter().sum())
}

/// Truth and prediction lists realising confusion matrix `m` over
/// `classes`.
pub fn expand(m: &[Vec<u64>], classes: &[String]) -> (Vec<String>, Vec<String>) {
    let mut truth = Vec::new();
    let mut pred = Vec::new();
    for (t, row) in m.iter().enumerate() {
        for (p, &n) in row.iter().enumerate() {
            for _ in 0..n {
                truth.push(classes[t].clone());
                pred.push(classes[p].clone());
            }
        }
    }
    (truth, pred)
}

// ---------------------------------------------------------------- grids

/// Every combination of `grid` by explicit recursion over the names in
/// sorted order, the last name varying fastest.
pub fn nested_combinations(grid: &Grid) -> Vec<BTreeMap<String, HyperValue>> {
    fn go(
        names: &[(&String, &Vec<HyperValue>)],
        current: &mut BTreeMap<String, HyperValue>,
        out: &mut Vec<BTreeMap<String, HyperValue>>,
    ) {
        let Some(((name, values), rest)) = names.split_first() else {
            out.push(current.clone());
            return;
        };
        for v in values.iter() {
            current.insert((*name).clone(), *v);
            go(rest, current, out);
        }
        current.remove(*name);
    }
    let names: Vec<(&String, &Vec<HyperValue>)> = grid.iter().collect();
    let mut out = Vec::new();
    go(&names, &mut BTreeMap::new(), &mut out);
    out
}

/// Mean held-out accuracy of `spec` over stratified folds, fitted fold by
/// fold without the library's cross-validation driver.
pub fn oracle_cv_accuracy(spec: &ClassifierSpec, data: &LabeledDataset, k: usize, task: Task, seed: u64) -> f64 {
    let labels = data.labels(task);
    let folds = stratified_folds(&labels, k, seed).unwrap();
    let mut total = 0.0;
    for f in 0..k {
        let train: Vec<usize> = (0..data.len()).filter(|&i| folds[i] != f).collect();
        let held: Vec<usize> = (0..data.len()).filter(|&i| folds[i] == f).collect();
        let model = fit(spec, &data.select(&train), task).unwrap();
        let test = data.select(&held);
        let predicted = model.predict_dataset(&test).unwrap();
        let correct = held.iter().zip(&predicted).filter(|(&i, p)| labels[i] == p.as_str()).count();
        total += correct as f64 / held.len() as f64;
    }
    total / k as f64
}

/// Index of the first maximum.
pub fn first_argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

// ------------------------------------------------------------- datasets

/// Two overlapping Gaussian blobs in `d` dimensions, labels "a" and "b".
pub fn blobs(n_per_class: usize, d: usize, gap: f64, seed: u64) -> LabeledDataset {
    use rand_distr::StandardNormal;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for (c, label) in ["a", "b"].iter().enumerate() {
        for _ in 0..n_per_class {
            let f = (0..d)
                .map(|_| {
                    let z: f64 = rng.sample(StandardNormal);
                    Some(z + gap * c as f64)
                })
                .collect();
            rows.push(Row::targeted(f, *label));
        }
    }
    let names = (0..d).map(|j| format!("x{j}")).collect();
    LabeledDataset::new(names, rows).unwrap()
}

// ------------------------------------------------------------------ cli

/// Grid file that keeps the ensemble kinds small enough for tests.
pub const SMALL_GRID: &str = "\
[RF]
n_estimators = [30]
max_depth = [8, \"inf\"]

[GBM]
n_estimators = [30]
max_depth = [2, 3]

[ADAB]
n_estimators = [30]

[SVM]
lambda = [0.001]
epochs = [10]
";

/// Output of one `wfkit` invocation.
pub struct Invocation {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Run the `wfkit` binary at `bin` with `args`.
pub fn wfkit(bin: &str, args: &[&str]) -> Invocation {
    let out = std::process::Command::new(bin).args(args).output().expect("spawn wfkit");
    Invocation {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

/// Run the whole pipeline in `dir`: synth capture, ingest, featurize,
/// label, split, tune and evaluate. Returns every produced file (relative
/// path, bytes) in path order, followed by the concatenated standard
/// output of the stages.
pub fn run_chain(bin: &str, dir: &std::path::Path, seed: u64) -> Vec<(String, Vec<u8>)> {
    let p = |name: &str| dir.join(name).to_string_lossy().into_owned();
    let seed = seed.to_string();
    std::fs::write(dir.join("grid.toml"), SMALL_GRID).unwrap();
    let stages: Vec<Vec<String>> = vec![
        vec!["synth".into(), "capture".into(), "--sites".into(), "4".into(), "--background".into(), "3".into(),
             "--visits".into(), "8".into(), "--seed".into(), seed.clone(), "--out".into(), p("synth")],
        vec!["ingest".into(), p("synth/capture.pcapng"), "--out".into(), p("flows.csv")],
        vec!["featurize".into(), p("flows.csv"), "--out".into(), p("features.csv")],
        vec!["label".into(), p("flows.csv"), p("features.csv"), "--monitored".into(), p("synth/monitored.txt"),
             "--out".into(), p("dataset.csv")],
        vec!["split".into(), p("dataset.csv"), "--stratify".into(), "binary".into(), "--seed".into(), seed.clone(),
             "--out".into(), p("split")],
        vec!["tune".into(), p("split"), "--task".into(), "binary".into(), "--grid".into(), p("grid.toml"),
             "--seed".into(), seed.clone(), "--out".into(), p("models")],
        vec!["evaluate".into(), p("split"), p("models"), "--out".into(), p("report.csv")],
    ];
    let mut stdout = String::new();
    for args in &stages {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let r = wfkit(bin, &args);
        assert_eq!(r.code, 0, "wfkit {}: {}", args.join(" "), r.stderr);
        stdout.push_str(&r.stdout);
    }
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                files.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    files.sort();
    files.push(("<stdout>".into(), stdout.into_bytes()));
    files
}
