use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use recom_ffi::*;

fn grid_arrays(rows: u32, cols: u32) -> (Vec<u32>, Vec<u32>) {
    let (mut src, mut dst) = (Vec::new(), Vec::new());
    for r in 0..rows {
        for c in 0..cols {
            let u = r * cols + c;
            if c + 1 < cols {
                src.push(u);
                dst.push(u + 1);
            }
            if r + 1 < rows {
                src.push(u);
                dst.push(u + cols);
            }
        }
    }
    (src, dst)
}

unsafe fn grid_graph(dem: &[i64], rep: &[i64]) -> *mut RecomGraph {
    let (src, dst) = grid_arrays(4, 4);
    let pops = [1u64; 16];
    let mut g = ptr::null_mut();
    let status = recom_graph_from_arrays(16, pops.as_ptr(), src.len(), src.as_ptr(), dst.as_ptr(), dem.as_ptr(), rep.as_ptr(), &mut g);
    assert_eq!(status, RecomStatus::Ok);
    g
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(recom_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn graph_from_arrays_and_share() {
    unsafe {
        let dem: Vec<i64> = (0..16).map(|i| if i < 4 { 3 } else { 1 }).collect();
        let rep = vec![1i64; 16];
        let g = grid_graph(&dem, &rep);
        assert_eq!(recom_graph_node_count(g), 16);
        assert_eq!(recom_graph_total_population(g), 16);
        assert_eq!(recom_graph_contest_count(g), 1);
        let mut share = 0.0;
        assert_eq!(recom_statewide_share(g, 0, &mut share), RecomStatus::Ok);
        assert!((share - 24.0 / 40.0).abs() < 1e-15);
        assert_eq!(recom_statewide_share(g, 1, &mut share), RecomStatus::InvalidArgument);
        assert!(last_error().contains("out of range"));
        recom_graph_free(g);
    }
}

#[test]
fn run_histogram_and_series_agree() {
    unsafe {
        let dem: Vec<i64> = (0..16).map(|i| if i % 4 < 2 { 3 } else { 1 }).collect();
        let rep = vec![2i64; 16];
        let g = grid_graph(&dem, &rep);
        let mut run = ptr::null_mut();
        assert_eq!(recom_run_chain(g, 2, 0.0, 500, 9, 2, &mut run), RecomStatus::Ok);
        assert_eq!(recom_run_observations(run), 500);

        let mut series = vec![0u32; 500];
        assert_eq!(recom_run_seat_halves(run, 0, series.as_mut_ptr(), 500), RecomStatus::Ok);
        let mut hist = vec![0u64; 5];
        assert_eq!(recom_run_histogram(run, 0, hist.as_mut_ptr(), 5), RecomStatus::Ok);
        let mut expect = vec![0u64; 5];
        for &s in &series {
            expect[s as usize] += 1;
        }
        assert_eq!(hist, expect);
        assert_eq!(hist.iter().sum::<u64>(), 500);
        assert_eq!(recom_run_histogram(run, 0, hist.as_mut_ptr(), 4), RecomStatus::InvalidArgument);

        let mut plan = vec![9u32; 16];
        assert_eq!(recom_run_seed_plan(run, plan.as_mut_ptr(), 16), RecomStatus::Ok);
        assert_eq!(plan.iter().filter(|&&d| d == 0).count(), 8);
        recom_run_free(run);
        recom_graph_free(g);
    }
}

#[test]
fn same_seed_same_series() {
    unsafe {
        let g = grid_graph(&[1; 16], &[1; 16]);
        let series = |seed| {
            let mut run = ptr::null_mut();
            assert_eq!(recom_run_chain(g, 4, 0.0, 50, seed, 0, &mut run), RecomStatus::Ok);
            let mut plan = vec![0u32; 16];
            recom_run_seed_plan(run, plan.as_mut_ptr(), 16);
            recom_run_free(run);
            plan
        };
        assert_eq!(series(5), series(5));
        recom_graph_free(g);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut g = ptr::null_mut();
        let pops = [1u64, 1, 1];
        let (src, dst) = ([0u32], [1u32]);
        let status = recom_graph_from_arrays(3, pops.as_ptr(), 1, src.as_ptr(), dst.as_ptr(), ptr::null(), ptr::null(), &mut g);
        assert_eq!(status, RecomStatus::DataError);
        assert!(g.is_null());
        assert!(last_error().contains("disconnected") || last_error().contains("connected"), "{}", last_error());

        let missing = CString::new("/nonexistent/graph.json").unwrap();
        assert_eq!(recom_graph_load(missing.as_ptr(), &mut g), RecomStatus::DataError);
        assert_eq!(recom_graph_load(ptr::null(), &mut g), RecomStatus::NullPointer);

        let g = grid_graph(&[1; 16], &[1; 16]);
        let mut run = ptr::null_mut();
        assert_eq!(recom_run_chain(g, 2, 0.0, 0, 1, 0, &mut run), RecomStatus::InvalidArgument);
        assert_eq!(recom_run_chain(g, 2, 0.0, 1, 1, 7, &mut run), RecomStatus::InvalidArgument);
        assert_eq!(recom_run_chain(g, 3, 0.0, 1, 1, 0, &mut run), RecomStatus::ChainError);
        assert!(run.is_null());
        assert_eq!(recom_run_chain(g, 2, 0.0, 1, 1, 0, &mut run), RecomStatus::Ok);
        assert_eq!(last_error(), "");
        recom_run_free(run);
        recom_graph_free(g);
        recom_graph_free(ptr::null_mut());
        recom_run_free(ptr::null_mut());
    }
}

#[test]
fn load_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.json");
    std::fs::write(
        &path,
        r#"{"schema_version":1,"metadata":{"contests":[{"name":"X","dem":"XD","rep":"XR"}]},
            "nodes":[{"id":"a","population":2,"vap":2,"county":"c","XD":3,"XR":1},
                     {"id":"b","population":3,"vap":3,"county":"c","XD":1,"XR":3}],
            "links":[{"source":"a","target":"b"}]}"#,
    )
    .unwrap();
    let c = CString::new(path.to_str().unwrap()).unwrap();
    unsafe {
        let mut g = ptr::null_mut();
        assert_eq!(recom_graph_load(c.as_ptr(), &mut g), RecomStatus::Ok);
        assert_eq!(recom_graph_total_population(g), 5);
        let mut share = 0.0;
        recom_statewide_share(g, 0, &mut share);
        assert_eq!(share, 0.5);
        recom_graph_free(g);
    }
}

#[test]
fn misc_entry_points() {
    assert_eq!(recom_efficiency_gap_simplified(0.5, 0.5), 0.0);
    assert!((recom_efficiency_gap_simplified(0.3783, 0.4965) - (-0.1147)).abs() < 1e-12);
    let v = unsafe { CStr::from_ptr(recom_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_the_api_and_compiles() {
    let header_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/recom.h");
    let header = std::fs::read_to_string(&header_path).unwrap();
    for name in [
        "typedef struct RecomGraph RecomGraph",
        "typedef struct RecomRun RecomRun",
        "RECOM_STATUS_CHAIN_ERROR = 4",
        "recom_graph_load(",
        "recom_graph_from_arrays(",
        "recom_run_chain(",
        "recom_run_histogram(",
        "recom_last_error(",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"recom.h\"\nint main(void) { RecomGraph *g = 0; recom_graph_free(g); return (int)RECOM_STATUS_OK; }\n",
    )
    .unwrap();
    match Command::new("cc")
        .arg("-fsyntax-only")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(header_path.parent().unwrap())
        .arg(&src)
        .output()
    {
        Ok(out) => assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr)),
        Err(_) => eprintln!("no C compiler; header syntax not checked"),
    }
}
