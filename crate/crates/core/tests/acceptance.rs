//! Acceptance suite: one test per release criterion, each printing its own
//! pass line. Run with `--nocapture` to see them.

use std::time::Instant;

use mesokit::{
    bank_of, cost_report, critical_path, functional_aggregate_via_sim, knn_search, nit_file_bytes,
    read_matrix_pcf1, read_nit, reduce_max_rows, rel_diff, run_module_baseline,
    run_module_delayed, sample_centroids, schedule_rounds, simulate, sub_rowwise, synth_cloud,
    write_matrix_pcf1, write_nit, Activation, AuConfig, AuStats, CloudShape, CostReport,
    DivergenceReport, Error, Mat, Mlp, Mode, ModuleConfig, NeighborIndexTable, PointCloud,
    SearchSpace, StageCosts, Xorshift64Star,
};

fn random_cloud(rng: &mut Xorshift64Star, n: usize, dim: usize) -> PointCloud {
    let data: Vec<f32> = (0..n * dim).map(|_| rng.next_f32()).collect();
    PointCloud::new(Mat::from_vec(n, dim, data).unwrap()).unwrap()
}

fn random_mlp(rng: &mut Xorshift64Star, widths: &[usize], activation: Activation) -> Mlp {
    let layers = widths
        .windows(2)
        .map(|w| {
            let limit = (6.0 / (w[0] + w[1]) as f32).sqrt();
            let data: Vec<f32> = (0..w[0] * w[1])
                .map(|_| (rng.next_f32() * 2.0 - 1.0) * limit)
                .collect();
            Mat::from_vec(w[0], w[1], data).unwrap()
        })
        .collect();
    Mlp::new(layers, activation).unwrap()
}

fn module(n_out: usize, k: usize, mlp: Mlp, seed: u64) -> ModuleConfig {
    ModuleConfig {
        n_out,
        k,
        mlp,
        search_space: SearchSpace::Coordinates,
        seed,
        include_self: true,
    }
}

fn pointnet_module_one(rng: &mut Xorshift64Star) -> ModuleConfig {
    let mlp = random_mlp(rng, &[3, 64, 64, 128], Activation::Rectifier);
    module(512, 32, mlp, 7)
}

/// Buffer size that splits an `n_in` x `m_out` table into exactly `parts`
/// column partitions, assuming `parts` divides `m_out`.
fn buffer_for_partitions(n_in: usize, m_out: usize, parts: usize) -> usize {
    n_in * 4 * (m_out / parts)
}

#[test]
fn acceptance_01_linear_exactness() {
    let start = Instant::now();
    let mut rng = Xorshift64Star::new(0xacce01);
    let cases = 100;
    let mut worst = 0.0f32;
    for case in 0..cases {
        let n = 16 + rng.next_index(2033); // up to 2048
        let n_out = 1 + rng.next_index(n.min(256));
        let k = 1 + rng.next_index(n.min(64));
        let w1 = 4 + rng.next_index(61);
        let widths = if case % 2 == 0 {
            vec![3, w1]
        } else {
            vec![3, w1, 4 + rng.next_index(61)]
        };
        let mlp = random_mlp(&mut rng, &widths, Activation::Identity);
        let cfg = module(n_out, k, mlp, rng.next_u64());
        let cloud = random_cloud(&mut rng, n, 3);

        let baseline = run_module_baseline(&cloud, &cfg).unwrap();
        let delayed = run_module_delayed(&cloud, &cfg).unwrap().output;
        let diff = rel_diff(baseline.mat(), delayed.mat());
        assert!(
            diff <= 1e-6,
            "case {case} (n={n}, n_out={n_out}, k={k}): rel diff {diff}"
        );
        worst = worst.max(diff);
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 30, "took {elapsed:?}");
    println!(
        "acceptance 01 linear-exactness: pass ({cases} identity cases, worst rel diff {worst:.2e}, {elapsed:?})"
    );
}

#[test]
fn acceptance_02_max_commutation() {
    let start = Instant::now();
    let mut rng = Xorshift64Star::new(0xacce02);
    let cases = 100;
    let mut worst = 0.0f32;
    for case in 0..cases {
        let n = 32 + rng.next_index(481);
        let n_out = 1 + rng.next_index(n.min(128));
        let k = 1 + rng.next_index(n.min(64));
        let width = 8 + rng.next_index(57);
        let mlp = random_mlp(&mut rng, &[3, width], Activation::Rectifier);
        let cfg = module(n_out, k, mlp, rng.next_u64());
        let cloud = random_cloud(&mut rng, n, 3);

        let run = run_module_delayed(&cloud, &cfg).unwrap();
        let pft = run.pft.mat();
        let nit = &run.nit;
        for c in 0..nit.n_out() {
            let rows = pft.gather_rows(nit.row(c));
            let centroid = pft.gather_rows(&[nit.centroid(c)]);
            // Subtracting after the max vs subtracting every row first.
            let max_first = sub_rowwise(&reduce_max_rows(&rows).unwrap(), &centroid).unwrap();
            let sub_first = reduce_max_rows(&sub_rowwise(&rows, &centroid).unwrap()).unwrap();
            let diff = rel_diff(&max_first, &sub_first);
            assert!(diff <= 1e-6, "case {case} centroid {c}: rel diff {diff}");
            worst = worst.max(diff);
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 30, "took {elapsed:?}");
    println!(
        "acceptance 02 max-commutation: pass ({cases} rectifier cases, worst rel diff {worst:.2e}, {elapsed:?})"
    );
}

#[test]
fn acceptance_03_mac_identity() {
    let start = Instant::now();
    let mut rng = Xorshift64Star::new(0xacce03);
    for _ in 0..500 {
        let n_out = 1 + rng.next_index(512);
        let k = 1 + rng.next_index(64);
        let n_in = n_out + rng.next_index(2048);
        let widths = vec![
            1 + rng.next_index(8),
            1 + rng.next_index(128),
            1 + rng.next_index(128),
        ];
        let mlp = random_mlp(&mut rng, &widths, Activation::Rectifier);
        let cfg = module(n_out, k, mlp, 0);
        let b = cost_report(&cfg, n_in, Mode::Baseline).macs_total;
        let d = cost_report(&cfg, n_in, Mode::Delayed).macs_total;
        // delayed / baseline == n_in / (n_out * k) as exact rationals.
        assert_eq!(
            u128::from(d) * (n_out as u128) * (k as u128),
            u128::from(b) * n_in as u128
        );
    }

    let cfg = pointnet_module_one(&mut rng);
    let b = cost_report(&cfg, 1024, Mode::Baseline).macs_total;
    let d = cost_report(&cfg, 1024, Mode::Delayed).macs_total;
    assert_eq!(b, 16 * d);

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 1, "took {elapsed:?}");
    println!(
        "acceptance 03 mac-identity: pass (500 rational checks, reference module ratio {}x, {elapsed:?})",
        b / d
    );
}

#[test]
fn acceptance_04_footprint_anchors() {
    let mut rng = Xorshift64Star::new(0xacce04);
    let cfg = pointnet_module_one(&mut rng);
    let delayed = cost_report(&cfg, 1024, Mode::Delayed);
    let baseline = cost_report(&cfg, 1024, Mode::Baseline);

    assert_eq!(delayed.pft_bytes, 524288);
    assert_eq!(baseline.aggregation_working_set_bytes, 12288);
    assert_eq!(*baseline.activation_bytes_per_layer.last().unwrap(), 8388608);
    println!(
        "acceptance 04 footprint-anchors: pass (pft {} B, input {} B, final baseline layer {} B)",
        delayed.pft_bytes,
        baseline.aggregation_working_set_bytes,
        baseline.activation_bytes_per_layer.last().unwrap()
    );
}

#[test]
fn acceptance_05_au_cycle_anchors() {
    // Single centroid, 32 neighbors, 32 banks, 128 columns resident.
    let cfg = AuConfig {
        pft_buffer_bytes: 512 * 1024,
        ..AuConfig::default()
    };

    let ideal = NeighborIndexTable::new(1, 32, (0..32).collect(), vec![0]).unwrap();
    let stats = simulate(&ideal, 1024, 128, &cfg).unwrap();
    assert_eq!(stats.partitions, 1);
    assert_eq!(stats.neighbor_read_cycles, 128);

    let one_bank: Vec<usize> = (0..32).map(|j| j * 32).collect();
    let worst_nit = NeighborIndexTable::new(1, 32, one_bank, vec![0]).unwrap();
    let worst = simulate(&worst_nit, 1024, 128, &cfg).unwrap();
    assert_eq!(worst.partitions, 1);
    assert_eq!(worst.neighbor_read_cycles, 32 * 128);

    println!(
        "acceptance 05 au-cycle-anchors: pass (ideal {} cycles, fully conflicted {} cycles)",
        stats.neighbor_read_cycles, worst.neighbor_read_cycles
    );
}

#[test]
fn acceptance_06_au_functional_equivalence() {
    let start = Instant::now();
    let mut rng = Xorshift64Star::new(0xacce06);
    let mut cases = 0;
    let mut worst = 0.0f32;

    // Random pipelines, each checked at partition counts 1, 2, 4, 8.
    for _ in 0..40 {
        let n = 64 + rng.next_index(449);
        let n_out = 1 + rng.next_index(n.min(64));
        let k = 1 + rng.next_index(n.min(32));
        let m_out = 8 * (1 + rng.next_index(6)); // multiple of 8
        let mlp = random_mlp(&mut rng, &[3, m_out], Activation::Rectifier);
        let cfg = module(n_out, k, mlp, rng.next_u64());
        let cloud = random_cloud(&mut rng, n, 3);
        let run = run_module_delayed(&cloud, &cfg).unwrap();

        for parts in [1usize, 2, 4, 8] {
            let au = AuConfig {
                pft_buffer_bytes: buffer_for_partitions(n, m_out, parts),
                ..AuConfig::default()
            };
            let got = functional_aggregate_via_sim(run.pft.mat(), &run.nit, &au).unwrap();
            let diff = rel_diff(&got, run.output.mat());
            assert!(diff <= 1e-6, "n={n}, parts={parts}: rel diff {diff}");
            worst = worst.max(diff);
            cases += 1;
        }
    }

    // Adversarial tables: every neighbor of a centroid in one bank.
    for _ in 0..10 {
        let n = 256;
        let m_out = 16;
        let n_out = 8;
        let k = 6;
        let pft_data: Vec<f32> = (0..n * m_out).map(|_| rng.next_gaussian()).collect();
        let pft = Mat::from_vec(n, m_out, pft_data).unwrap();
        let mut indices = Vec::new();
        let mut centroids = Vec::new();
        for c in 0..n_out {
            let bank = rng.next_index(32);
            for j in 0..k {
                indices.push(bank + 32 * (j % (n / 32)));
            }
            centroids.push(indices[c * k]);
        }
        let nit = NeighborIndexTable::new(n_out, k, indices, centroids).unwrap();

        // Direct gather/max/subtract oracle.
        let mut expect = Vec::new();
        for c in 0..n_out {
            let rows = pft.gather_rows(nit.row(c));
            let centroid = pft.gather_rows(&[nit.centroid(c)]);
            let diff = sub_rowwise(&reduce_max_rows(&rows).unwrap(), &centroid).unwrap();
            expect.push(diff.row(0).to_vec());
        }
        let expect = Mat::from_rows(&expect).unwrap();

        for parts in [1usize, 2, 4, 8] {
            let au = AuConfig {
                pft_buffer_bytes: buffer_for_partitions(n, m_out, parts),
                ..AuConfig::default()
            };
            let got = functional_aggregate_via_sim(&pft, &nit, &au).unwrap();
            let diff = rel_diff(&got, &expect);
            assert!(diff <= 1e-6, "adversarial parts={parts}: rel diff {diff}");
            worst = worst.max(diff);
            cases += 1;
        }
    }

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 60, "took {elapsed:?}");
    println!(
        "acceptance 06 au-functional-equivalence: pass ({cases} cases, worst rel diff {worst:.2e}, {elapsed:?})"
    );
}

#[test]
fn acceptance_07_round_occupancy_oracle() {
    let mut rng = Xorshift64Star::new(0xacce07);
    let mut checked = 0;
    for banks in [4usize, 8, 32] {
        for _ in 0..400 {
            let k = 1 + rng.next_index(64);
            let indices: Vec<usize> = (0..k).map(|_| rng.next_index(4096)).collect();
            let rounds = schedule_rounds(&indices, banks);

            let mut occupancy = vec![0usize; banks];
            for &i in &indices {
                occupancy[bank_of(i, banks)] += 1;
            }
            assert_eq!(rounds.len(), *occupancy.iter().max().unwrap());
            assert_eq!(rounds.iter().map(Vec::len).sum::<usize>(), k);
            checked += 1;
        }
    }
    println!("acceptance 07 round-occupancy-oracle: pass ({checked} index sets over 3 bank widths)");
}

#[test]
fn acceptance_08_nit_reread_law() {
    let mut rng = Xorshift64Star::new(0xacce08);
    let mut checked = 0;
    for _ in 0..30 {
        let n_in = 128 + rng.next_index(1921);
        let n_out = 1 + rng.next_index(n_in.min(256));
        let k = 1 + rng.next_index(32);
        let indices: Vec<usize> = (0..n_out * k).map(|_| rng.next_index(n_in.min(4096))).collect();
        let centroids: Vec<usize> = (0..n_out).map(|c| indices[c * k]).collect();
        let nit = NeighborIndexTable::new(n_out, k, indices, centroids).unwrap();
        let m_out = 16 + rng.next_index(241);

        let mut last_dram = 0u64;
        for kb in [1024usize, 512, 256, 128, 64, 32, 16, 8] {
            let au = AuConfig {
                pft_buffer_bytes: kb * 1024,
                ..AuConfig::default()
            };
            let stats = simulate(&nit, n_in, m_out, &au).unwrap();
            assert_eq!(stats.nit_entry_reads, n_out as u64 * stats.partitions);
            assert!(
                stats.dram_nit_bytes >= last_dram,
                "index traffic shrank as the buffer shrank"
            );
            last_dram = stats.dram_nit_bytes;
            checked += 1;
        }
    }
    println!("acceptance 08 nit-reread-law: pass ({checked} sweep points)");
}

#[test]
fn acceptance_09_knn_oracle() {
    let start = Instant::now();
    let mut rng = Xorshift64Star::new(0xacce09);
    let cases = 100;
    for case in 0..cases {
        let n = 8 + rng.next_index(505);
        // Quantized coordinates force distance ties so the index tie-break
        // is exercised, not just reachable.
        let quantize = case % 3 == 0;
        let data: Vec<f32> = (0..n * 3)
            .map(|_| {
                let v = rng.next_f32();
                if quantize {
                    (v * 4.0).floor() / 4.0
                } else {
                    v
                }
            })
            .collect();
        let cloud = PointCloud::new(Mat::from_vec(n, 3, data).unwrap()).unwrap();
        let n_out = 1 + rng.next_index(n.min(64));
        let k = 1 + rng.next_index(n.min(64));
        let centroids = sample_centroids(&cloud, n_out, rng.next_u64()).unwrap();
        let nit = knn_search(&cloud, &centroids, k).unwrap();

        for (row, &c) in centroids.iter().enumerate() {
            let crow = cloud.mat().row(c);
            let mut all: Vec<(f64, usize)> = (0..n)
                .map(|i| {
                    let d: f64 = cloud
                        .mat()
                        .row(i)
                        .iter()
                        .zip(crow)
                        .map(|(a, b)| {
                            let d = f64::from(*a) - f64::from(*b);
                            d * d
                        })
                        .sum();
                    (d, i)
                })
                .collect();
            all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            let expect: Vec<usize> = all[..k].iter().map(|&(_, i)| i).collect();
            assert_eq!(nit.row(row), &expect[..], "case {case} centroid {c}");
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 30, "took {elapsed:?}");
    println!("acceptance 09 knn-oracle: pass ({cases} clouds against the full-sort oracle, {elapsed:?})");
}

#[test]
fn acceptance_10_format_round_trips() {
    let mut rng = Xorshift64Star::new(0xacce10);
    let dir = std::env::temp_dir().join(format!("mesokit-acc10-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();

    // NIT: write, read, write again; the two files must be identical.
    let cloud = synth_cloud(500, CloudShape::UniformCube, 5).unwrap();
    let centroids = sample_centroids(&cloud, 80, 3).unwrap();
    let nit = knn_search(&cloud, &centroids, 24).unwrap();
    let nit_a = dir.join("a.nit");
    let nit_b = dir.join("b.nit");
    write_nit(&nit_a, &nit).unwrap();
    let parsed = read_nit(&nit_a).unwrap();
    write_nit(&nit_b, &parsed).unwrap();
    let bytes_a = std::fs::read(&nit_a).unwrap();
    assert_eq!(bytes_a, std::fs::read(&nit_b).unwrap());
    assert_eq!(bytes_a.len() as u64, nit_file_bytes(80));

    // Rejections: wide tables and unencodable indices.
    let wide = NeighborIndexTable::new(1, 65, (0..65).collect(), vec![0]).unwrap();
    assert!(matches!(
        write_nit(&dir.join("wide.nit"), &wide).unwrap_err(),
        Error::Capacity(_)
    ));
    let tall = NeighborIndexTable::new(1, 2, vec![4096, 1], vec![4096]).unwrap();
    assert!(matches!(
        write_nit(&dir.join("tall.nit"), &tall).unwrap_err(),
        Error::Capacity(_)
    ));

    // PCF1: bit-exact matrix round-trip.
    let data: Vec<f32> = (0..100 * 3).map(|_| rng.next_gaussian()).collect();
    let mat = Mat::from_vec(100, 3, data).unwrap();
    let pcf = dir.join("cloud.pcf1");
    write_matrix_pcf1(&pcf, &mat).unwrap();
    let back = read_matrix_pcf1(&pcf).unwrap();
    let bits = |m: &Mat| m.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&mat), bits(&back));

    // JSON reports: serialize, parse, serialize; strings must match.
    let cfg = module(
        8,
        4,
        random_mlp(&mut rng, &[3, 16], Activation::Rectifier),
        1,
    );
    let cost = cost_report(&cfg, 64, Mode::Delayed);
    let cost_json = serde_json::to_string(&cost).unwrap();
    let cost_back: CostReport = serde_json::from_str(&cost_json).unwrap();
    assert_eq!(cost, cost_back);
    assert_eq!(cost_json, serde_json::to_string(&cost_back).unwrap());

    let stats = simulate(&nit, 500, 32, &AuConfig::default()).unwrap();
    let stats_json = serde_json::to_string(&stats).unwrap();
    let stats_back: AuStats = serde_json::from_str(&stats_json).unwrap();
    assert_eq!(stats, stats_back);
    assert_eq!(stats_json, serde_json::to_string(&stats_back).unwrap());

    let div = mesokit::divergence_report(&cloud, &cfg).unwrap();
    let div_json = serde_json::to_string(&div).unwrap();
    let div_back: DivergenceReport = serde_json::from_str(&div_json).unwrap();
    assert_eq!(div_json, serde_json::to_string(&div_back).unwrap());

    std::fs::remove_dir_all(&dir).ok();
    println!("acceptance 10 format-round-trips: pass (NIT, PCF1, and JSON reports round-trip bit-exactly)");
}

#[test]
fn acceptance_11_critical_path() {
    let mut rng = Xorshift64Star::new(0xacce11);
    let mut equalities = 0;
    for _ in 0..1000 {
        // Zero stages appear often enough to exercise the equality edge;
        // nonzero stages stay well above rounding absorption.
        let mut draw = |width: f64| {
            if rng.next_index(8) == 0 {
                0.0
            } else {
                0.1 + f64::from(rng.next_f32()) * width
            }
        };
        let s = StageCosts {
            neighbor: draw(100.0),
            aggregate: draw(100.0),
            feature: draw(100.0),
        };
        let b = critical_path(s, Mode::Baseline).unwrap();
        let d = critical_path(s, Mode::Delayed).unwrap();
        assert!(d <= b, "delayed {d} exceeds baseline {b} for {s:?}");
        if s.neighbor.min(s.feature) == 0.0 {
            assert_eq!(d, b, "overlap with an empty stage must cost nothing");
            equalities += 1;
        } else {
            assert!(d < b, "nonzero overlap must strictly win ({s:?})");
        }
    }
    assert!(equalities > 50, "equality edge undersampled ({equalities})");
    println!(
        "acceptance 11 critical-path: pass (1000 sweeps, {equalities} equality edge cases)"
    );
}
