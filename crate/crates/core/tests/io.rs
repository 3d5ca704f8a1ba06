use std::path::Path;

use rssm::calling::{call_breakpoints, CallKind, CallResult};
use rssm::io::*;
use rssm::rng::seeded;
use rssm::sampler::run_chain;
use rssm::simulation::{generate_lai, SimSpec};
use rssm::{ChainConfig, Error, Priors, ProbeSeries};

fn origin() -> &'static Path {
    Path::new("probes.csv")
}

#[test]
fn minimal_two_column_file() {
    let s = parse_series("1,0.5\n2,-0.2", origin()).unwrap();
    assert_eq!(s.positions(), [1.0, 2.0]);
    assert_eq!(s.values(), [0.5, -0.2]);
}

#[test]
fn unsorted_rows_are_sorted() {
    let sorted = parse_series("1,0.1\n2,0.2\n5,0.5\n9,0.9", origin()).unwrap();
    let shuffled = parse_series("5,0.5\n1,0.1\n9,0.9\n2,0.2", origin()).unwrap();
    assert_eq!(sorted, shuffled);
}

#[test]
fn duplicate_position_is_named() {
    let err = parse_series("1,0.1\n7,0.2\n7,0.3", origin()).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("duplicate position 7"), "{msg}");
}

#[test]
fn header_and_tabs_are_detected() {
    let s = parse_series("pos\tlog2ratio\n10\t0.25\n20\t-0.5\n", origin()).unwrap();
    assert_eq!(s.positions(), [10.0, 20.0]);
    let c = parse_series("# exported\nposition,value\n\n3,1\n4,2\n", origin()).unwrap();
    assert_eq!(c.values(), [1.0, 2.0]);
}

#[test]
fn bad_rows_report_line_numbers() {
    match parse_series("1,0.1\n2,abc\n3,0.3", origin()).unwrap_err() {
        Error::Parse { line, msg, .. } => {
            assert_eq!(line, 2);
            assert!(msg.contains("abc"));
        }
        e => panic!("unexpected {e}"),
    }
    match parse_series("1,0.1\n2,NA\n3,0.3", origin()).unwrap_err() {
        Error::Parse { line, msg, .. } => {
            assert_eq!(line, 2);
            assert!(msg.contains("missing"));
        }
        e => panic!("unexpected {e}"),
    }
    assert!(parse_series("1,0.1\n2,", origin()).is_err());
    assert!(parse_series("position,value\n1,0.1\n", origin()).is_err());
    assert!(parse_series("1;0.1\n2;0.2", origin()).is_err());
}

#[test]
fn missing_file_is_an_io_error() {
    let err = read_series(Path::new("/nonexistent/probes.csv")).unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
}

fn small_fit() -> (ProbeSeries, rssm::PosteriorDraws) {
    let spec = SimSpec {
        count: 1,
        seed: 5,
        ..SimSpec::default()
    };
    let series = generate_lai(&spec).unwrap().remove(0).series;
    let draws = run_chain(&series, &Priors::default(), &ChainConfig::new(600, 200, 4, 9)).unwrap();
    (series, draws)
}

#[test]
fn summary_table_round_trips_exactly() {
    let (series, draws) = small_fit();
    let rows = summarize_draws(&series, &draws, 0.95).unwrap();
    let text = format_summary_table(&rows);
    let back = parse_summary_table(&text, Path::new("summary.tsv")).unwrap();
    assert_eq!(rows, back);
    assert!(back.last().unwrap().xi.is_none());
    assert_eq!(text.lines().count(), series.len() + 1);
}

#[test]
fn credible_intervals_bracket_the_mean() {
    let (series, draws) = small_fit();
    for r in summarize_draws(&series, &draws, 0.95).unwrap() {
        let mut intervals = vec![r.mu, r.eps];
        intervals.extend(r.xi);
        for i in intervals {
            assert!(i.lower <= i.mean && i.mean <= i.upper, "{i:?}");
        }
    }
}

#[test]
fn empty_call_set_writes_header_only() {
    let (series, _) = small_fit();
    let empty = CallResult {
        kind: CallKind::Breakpoint,
        threshold: 0.9,
        calls: vec![],
        all_selected: false,
    };
    assert_eq!(format_call_table(&series, &[&empty]), "kind\tindex\tposition\tscore\tround\n");
}

#[test]
fn call_table_lists_calls_in_selection_order() {
    let (series, draws) = small_fit();
    let calls = call_breakpoints(&draws, 0.6, &mut seeded(1)).unwrap();
    let text = format_call_table(&series, &[&calls]);
    let lines: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(lines.len(), calls.len());
    for (line, call) in lines.iter().zip(&calls.calls) {
        let fields: Vec<&str> = line.split('\t').collect();
        assert_eq!(fields[0], "breakpoint");
        assert_eq!(fields[1], call.position.to_string());
        assert_eq!(fields[4], call.round.to_string());
    }
}

#[test]
fn draws_file_round_trips() {
    let (series, draws) = small_fit();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fit.draws");
    write_draws(&path, &series, &draws).unwrap();
    let (s2, d2) = read_draws(&path).unwrap();
    assert_eq!(series, s2);
    assert_eq!(draws, d2);

    let mut bytes = std::fs::read(&path).unwrap();
    bytes.truncate(bytes.len() - 8);
    assert!(decode_draws(&bytes, &path).is_err());
    assert!(decode_draws(b"not a draws file at all!", &path).is_err());
}

#[test]
fn series_file_round_trips() {
    let s = ProbeSeries::new(vec![1.5, 20.0, 300.25], vec![0.1, -1e-9, 3.0]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.tsv");
    write_text(&path, &format_series(&s)).unwrap();
    assert_eq!(read_series(&path).unwrap(), s);
}

#[test]
fn manifest_hash_tracks_content() {
    let input = InputSource::File {
        path: "probes.csv".into(),
    };
    let a = RunManifest::new(Some(input), "out".into(), 7);
    let mut b = a.clone();
    assert_eq!(a.config_hash().unwrap(), b.config_hash().unwrap());
    assert_eq!(a.config_hash().unwrap().len(), 64);
    b.seed = 8;
    assert_ne!(a.config_hash().unwrap(), b.config_hash().unwrap());

    let json = serde_json::to_string(&a).unwrap();
    let back: RunManifest = serde_json::from_str(&json).unwrap();
    assert_eq!(a, back);
}

#[test]
fn manifest_validation() {
    let spec = SimSpec {
        count: 3,
        ..SimSpec::default()
    };
    let ok = RunManifest::new(Some(InputSource::Simulation { spec: spec.clone(), index: 2 }), "o".into(), 1);
    ok.validate().unwrap();
    let out_of_range = RunManifest::new(Some(InputSource::Simulation { spec, index: 3 }), "o".into(), 1);
    assert!(out_of_range.validate().is_err());
    let mut bad_alpha = ok.clone();
    bad_alpha.alpha = 1.5;
    assert!(bad_alpha.validate().is_err());
    let mut bad_level = ok.clone();
    bad_level.credible_level = 1.0;
    assert!(bad_level.validate().is_err());
    let no_input = RunManifest { input: None, ..ok };
    no_input.validate().unwrap();
    assert!(no_input.load_series().is_err());
}
