use hkt::domain::{
    read_archive, read_logs, parse_qmatrix, write_archive, write_logs, write_qmatrix, BuildParams, Dataset,
};
use hkt::synth::{generate, GroundTruth, SynthConfig};

fn config() -> SynthConfig {
    SynthConfig {
        groups: 5,
        students_per_group: 6,
        exercises: 15,
        concepts: 4,
        frames: 6,
        shared_per_frame: 3,
        seed: 21,
        ..SynthConfig::default()
    }
}

#[test]
fn text_formats_reproduce_the_dataset() {
    let s = generate(&config()).unwrap();
    let mut logs = Vec::new();
    write_logs(&mut logs, &s.records).unwrap();
    let mut q = Vec::new();
    write_qmatrix(&mut q, &s.qmatrix).unwrap();

    let records = read_logs(logs.as_slice()).unwrap();
    assert_eq!(records, s.records);
    let qmatrix = parse_qmatrix(q.as_slice()).unwrap();
    assert_eq!(qmatrix, s.qmatrix);
    let rebuilt = Dataset::build(&records, &qmatrix, s.dataset.params).unwrap();
    assert_eq!(rebuilt, s.dataset);

    let mut archive = Vec::new();
    write_archive(&mut archive, &s.dataset).unwrap();
    assert_eq!(read_archive(archive.as_slice()).unwrap(), s.dataset);
}

#[test]
fn sidecar_roundtrips_through_json() {
    let s = generate(&config()).unwrap();
    let text = serde_json::to_string(&s.truth).unwrap();
    let back: GroundTruth = serde_json::from_str(&text).unwrap();
    assert_eq!(back, s.truth);
    assert_eq!(back.ability.len(), 30);
    assert_eq!(back.difficulty.len(), 15);
}

#[test]
fn group_rates_are_member_means() {
    let s = generate(&config()).unwrap();
    let mut checked = 0;
    for seq in &s.dataset.sequences.groups {
        for f in &seq.frames {
            for g in &f.group {
                let responses: Vec<f64> = f
                    .students
                    .iter()
                    .flatten()
                    .filter(|it| it.exercise == g.exercise)
                    .map(|it| it.response as f64)
                    .collect();
                let mean = responses.iter().sum::<f64>() / responses.len() as f64;
                assert!((g.correct_rate - mean).abs() < 1e-12);
                checked += 1;
            }
        }
    }
    assert!(checked > 0);
}

#[test]
fn ground_truth_matches_the_catalog_and_presence() {
    let cfg = config();
    let s = generate(&cfg).unwrap();
    for (g, seq) in s.dataset.sequences.groups.iter().enumerate() {
        assert_eq!(seq.frames.len(), cfg.frames);
        for (t, f) in seq.frames.iter().enumerate() {
            for slot in 0..cfg.students_per_group {
                let student = g * cfg.students_per_group + slot;
                assert_eq!(f.is_present(slot), s.truth.present[student][t]);
            }
            assert!(f.num_present() >= 1);
        }
    }
}

#[test]
fn upward_trend_raises_average_ability() {
    let s = generate(&SynthConfig {
        ability_trend: 0.3,
        ..config()
    })
    .unwrap();
    let avg = |t: usize| {
        s.truth.ability.iter().map(|a| a[t].iter().sum::<f64>()).sum::<f64>()
            / (s.truth.ability.len() * 4) as f64
    };
    assert!(avg(5) > avg(0) + 1.0);
}

#[test]
fn correctness_tracks_ability_minus_difficulty() {
    let s = generate(&SynthConfig {
        groups: 20,
        ..config()
    })
    .unwrap();
    let (mut easy, mut hard) = ((0.0, 0.0), (0.0, 0.0));
    for r in &s.records {
        let e = s.qmatrix.exercise_index(&r.exercise).unwrap();
        let bucket = if s.truth.difficulty[e] < 0.0 { &mut easy } else { &mut hard };
        bucket.0 += r.correct as f64;
        bucket.1 += 1.0;
    }
    assert!(easy.0 / easy.1 > hard.0 / hard.1 + 0.1);
}

#[test]
fn coverage_filtering_matches_default_build() {
    let s = generate(&config()).unwrap();
    assert_eq!(s.dataset.params, BuildParams { span_secs: 86_400, ..BuildParams::default() });
}
