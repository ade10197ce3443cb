use std::ffi::{CStr, CString};
use std::io::Write;
use std::ptr;

use graphssl_ffi::*;

fn path_graph(n: usize) -> *mut GsGraph {
    let src: Vec<usize> = (0..n - 1).collect();
    let dst: Vec<usize> = (1..n).collect();
    let w = vec![1.0; n - 1];
    let mut g = ptr::null_mut();
    let st = unsafe { gs_graph_from_edges(n, src.as_ptr(), dst.as_ptr(), w.as_ptr(), n - 1, &mut g) };
    assert_eq!(st, GsStatus::Ok);
    g
}

fn last_error() -> String {
    let p = gs_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn scores(sol: *const GsSolution) -> Vec<f64> {
    let len = unsafe { gs_solution_len(sol) };
    let mut u = vec![0.0; len];
    assert_eq!(unsafe { gs_solution_scores(sol, u.as_mut_ptr(), len) }, GsStatus::Ok);
    u
}

#[test]
fn version_and_defaults() {
    assert_eq!(gs_abi_version(), GS_ABI_VERSION);
    let cfg = gs_solver_config_default();
    assert_eq!(cfg.rel_tol, 1e-10);
    assert_eq!(cfg.max_iter, 0);
    assert_eq!(cfg.pinv_normalization, GsPinvNormalization::MeanZero);
}

#[test]
fn laplace_on_path_is_linear() {
    let g = path_graph(3);
    assert_eq!(unsafe { gs_graph_node_count(g) }, 3);
    let idx = [0usize, 2];
    let val = [1.0, -1.0];
    let mut sol = ptr::null_mut();
    let st = unsafe { gs_laplace_learn(g, idx.as_ptr(), val.as_ptr(), 2, ptr::null(), &mut sol) };
    assert_eq!(st, GsStatus::Ok);
    let u = scores(sol);
    assert_eq!(u[0], 1.0);
    assert!(u[1].abs() < 1e-9);
    assert_eq!(u[2], -1.0);
    assert_eq!(unsafe { gs_solution_offset(sol) }, 0.0);
    unsafe {
        gs_solution_free(sol);
        gs_graph_free(g);
    }
}

#[test]
fn poisson_and_regularize_run_with_config() {
    let g = path_graph(5);
    let idx = [0usize, 4];
    let val = [1.0, -1.0];
    let cfg = GsSolverConfig {
        rel_tol: 1e-12,
        max_iter: 100,
        pinv_normalization: GsPinvNormalization::MeanZero,
    };
    let mut p = ptr::null_mut();
    let mut r = ptr::null_mut();
    unsafe {
        assert_eq!(gs_poisson_learn(g, idx.as_ptr(), val.as_ptr(), 2, &cfg, &mut p), GsStatus::Ok);
        assert_eq!(
            gs_laplace_regularize(g, idx.as_ptr(), val.as_ptr(), 2, 1.0, 0, &cfg, &mut r),
            GsStatus::Ok
        );
    }
    let up = scores(p);
    let ur = scores(r);
    // antisymmetric labels on a symmetric path give antisymmetric scores
    for k in 0..5 {
        assert!((up[k] + up[4 - k]).abs() < 1e-9);
        assert!((ur[k] + ur[4 - k]).abs() < 1e-9);
    }
    assert!(up[0] > up[1] && up[1] > up[2]);
    assert!(unsafe { gs_solution_iterations(p) } > 0);

    let mut json = ptr::null_mut();
    assert_eq!(unsafe { gs_solution_to_json(p, &mut json) }, GsStatus::Ok);
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
    assert!(text.contains("\"method\":\"poisson\""), "{text}");
    unsafe {
        gs_string_free(json);
        gs_solution_free(p);
        gs_solution_free(r);
        gs_graph_free(g);
    }
}

#[test]
fn disconnected_graph_is_numeric_failure() {
    let src = [0usize, 2];
    let dst = [1usize, 3];
    let w = [1.0, 1.0];
    let mut g = ptr::null_mut();
    unsafe {
        assert_eq!(gs_graph_from_edges(4, src.as_ptr(), dst.as_ptr(), w.as_ptr(), 2, &mut g), GsStatus::Ok);
    }
    let idx = [0usize, 2];
    let val = [1.0, -1.0];
    let mut sol = ptr::null_mut();
    let st = unsafe { gs_poisson_learn(g, idx.as_ptr(), val.as_ptr(), 2, ptr::null(), &mut sol) };
    assert_eq!(st, GsStatus::NumericFailure);
    assert!(sol.is_null());
    assert!(last_error().contains("disconnected"));

    let mut ct = 0.0;
    assert_eq!(unsafe { gs_commute_time(g, 0, 3, ptr::null(), &mut ct) }, GsStatus::NumericFailure);
    unsafe { gs_graph_free(g) };
}

#[test]
fn invalid_arguments_and_nulls() {
    let src = [0usize];
    let dst = [5usize];
    let w = [1.0];
    let mut g = ptr::null_mut();
    let st = unsafe { gs_graph_from_edges(3, src.as_ptr(), dst.as_ptr(), w.as_ptr(), 1, &mut g) };
    assert_eq!(st, GsStatus::InvalidArgument);
    assert!(g.is_null());

    let st = unsafe { gs_graph_from_edges(3, ptr::null(), dst.as_ptr(), w.as_ptr(), 1, &mut g) };
    assert_eq!(st, GsStatus::NullPointer);

    let g = path_graph(3);
    let idx = [7usize];
    let val = [1.0];
    let mut sol = ptr::null_mut();
    let st = unsafe { gs_laplace_learn(g, idx.as_ptr(), val.as_ptr(), 1, ptr::null(), &mut sol) };
    assert_eq!(st, GsStatus::InvalidArgument);
    let st = unsafe { gs_laplace_learn(ptr::null(), idx.as_ptr(), val.as_ptr(), 1, ptr::null(), &mut sol) };
    assert_eq!(st, GsStatus::NullPointer);

    let bad = GsSolverConfig {
        rel_tol: -1.0,
        max_iter: 0,
        pinv_normalization: GsPinvNormalization::MeanZero,
    };
    let idx = [0usize];
    let st = unsafe { gs_poisson_learn(g, idx.as_ptr(), val.as_ptr(), 1, &bad, &mut sol) };
    assert_eq!(st, GsStatus::InvalidArgument);

    let st = unsafe { gs_laplace_regularize(g, idx.as_ptr(), val.as_ptr(), 1, 0.0, 0, ptr::null(), &mut sol) };
    assert_eq!(st, GsStatus::InvalidArgument);
    assert!(last_error().contains("lambda"));

    assert_eq!(unsafe { gs_graph_node_count(ptr::null()) }, 0);
    assert!(unsafe { gs_solution_offset(ptr::null()) }.is_nan());
    unsafe {
        gs_graph_free(ptr::null_mut());
        gs_solution_free(ptr::null_mut());
        gs_string_free(ptr::null_mut());
        gs_graph_free(g);
    }
}

#[test]
fn load_from_file_and_io_errors() {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    writeln!(f, "n 3\n0 1 1.0\n1 2 2.0").unwrap();
    let path = CString::new(f.path().to_str().unwrap()).unwrap();
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { gs_graph_load(path.as_ptr(), &mut g) }, GsStatus::Ok);
    assert_eq!(unsafe { gs_graph_node_count(g) }, 3);

    // path 0-1-2 with weights 1 and 2: resistance 1.5, volume 6
    let mut ct = 0.0;
    assert_eq!(unsafe { gs_commute_time(g, 0, 2, ptr::null(), &mut ct) }, GsStatus::Ok);
    assert!((ct - 9.0).abs() < 1e-8, "{ct}");
    unsafe { gs_graph_free(g) };

    let missing = CString::new("/nonexistent/graph.txt").unwrap();
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { gs_graph_load(missing.as_ptr(), &mut g) }, GsStatus::Io);
    assert!(g.is_null());
}

#[test]
fn auc_through_abi() {
    let s = [0.1, 0.4, 0.35, 0.8];
    let t = [0u8, 0, 1, 1];
    let mut a = 0.0;
    assert_eq!(unsafe { gs_auc(s.as_ptr(), t.as_ptr(), 4, &mut a) }, GsStatus::Ok);
    assert_eq!(a, 0.75);

    let t = [1u8; 4];
    assert_eq!(unsafe { gs_auc(s.as_ptr(), t.as_ptr(), 4, &mut a) }, GsStatus::InvalidArgument);
}

#[test]
fn scores_length_mismatch() {
    let g = path_graph(3);
    let idx = [0usize, 2];
    let val = [1.0, 0.0];
    let mut sol = ptr::null_mut();
    unsafe {
        assert_eq!(gs_laplace_learn(g, idx.as_ptr(), val.as_ptr(), 2, ptr::null(), &mut sol), GsStatus::Ok);
        let mut buf = [0.0; 2];
        assert_eq!(gs_solution_scores(sol, buf.as_mut_ptr(), 2), GsStatus::InvalidArgument);
        gs_solution_free(sol);
        gs_graph_free(g);
    }
}
