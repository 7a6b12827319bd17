use std::ffi::{c_char, CStr, CString};
use std::ptr;

use neucredit::cli::{cmd_generate, cmd_train, DataKind, GenerateArgs, LossArg, ModelArg, TrainArgs, ViewArg};
use neucredit_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 512];
    let mut len = 0;
    assert_eq!(unsafe { nc_last_error_message(buf.as_mut_ptr(), buf.len(), &mut len) }, NC_OK);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap().to_owned()
}

fn trained_checkpoint(dir: &std::path::Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let data = dir.join("c.jsonl");
    cmd_generate(&GenerateArgs {
        out: data.clone(),
        n: 20,
        len: 0,
        seed: 5,
        kind: DataKind::Consumers,
    })
    .unwrap();
    let config = dir.join("run.json");
    std::fs::write(&config, r#"{"training": {"batch_size": 8, "max_epochs": 1}, "hidden": 2}"#).unwrap();
    let ckpt = dir.join("m.json");
    cmd_train(&TrainArgs {
        data: data.clone(),
        model: ModelArg::Neucredit,
        view: ViewArg::All,
        loss: Some(LossArg::Conditional),
        config: Some(config),
        out_checkpoint: ckpt.clone(),
        history_csv: None,
        seed: Some(1),
    })
    .unwrap();
    (data, ckpt)
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(nc_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn load_score_and_free() {
    let dir = tempfile::tempdir().unwrap();
    let (data, ckpt) = trained_checkpoint(dir.path());
    let path = CString::new(ckpt.to_str().unwrap()).unwrap();
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { nc_model_load(path.as_ptr(), &mut model) }, NC_OK);
    assert!(!model.is_null());

    let records = CString::new(std::fs::read_to_string(&data).unwrap()).unwrap();
    let mut need = 0;
    let mut tiny = [0 as c_char; 4];
    let rc = unsafe { nc_model_score_json(model, records.as_ptr(), tiny.as_mut_ptr(), tiny.len(), &mut need) };
    assert_eq!(rc, NC_ERR_BUFFER_TOO_SMALL);
    assert!(need > 4);
    assert!(last_error().contains("needed"));

    let mut buf = vec![0 as c_char; need];
    let rc = unsafe { nc_model_score_json(model, records.as_ptr(), buf.as_mut_ptr(), buf.len(), &mut need) };
    assert_eq!(rc, NC_OK);
    let json = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap();
    let rows: Vec<serde_json::Value> = serde_json::from_str(json).unwrap();

    let checkpoint = neucredit::cli::Checkpoint::load(&ckpt).unwrap();
    let examples = neucredit::data::load_dataset(&data).unwrap().examples();
    let expected = checkpoint.predict(&examples).unwrap();
    assert_eq!(rows.len(), expected.len());
    for (row, s) in rows.iter().zip(&expected) {
        assert_eq!(row["y_hat"].as_f64().unwrap().to_bits(), s.y_hat.to_bits());
        assert_eq!(row["parts"].as_array().unwrap().len(), 3);
    }
    unsafe { nc_model_free(model) };
}

#[test]
fn failures_set_codes_and_messages() {
    let missing = CString::new("/nonexistent/model.json").unwrap();
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { nc_model_load(missing.as_ptr(), &mut model) }, NC_ERR_IO);
    assert!(model.is_null());
    assert!(last_error().contains("/nonexistent/model.json"));

    assert_eq!(unsafe { nc_model_load(ptr::null(), &mut model) }, NC_ERR_NULL);
    let bad = [0xffu8, 0];
    assert_eq!(unsafe { nc_model_load(bad.as_ptr().cast(), &mut model) }, NC_ERR_INVALID_ARG);

    let mut out = 0.0;
    let scores = [0.2, 0.4];
    let labels = [1u8, 1];
    assert_eq!(unsafe { nc_auc(scores.as_ptr(), labels.as_ptr(), 2, &mut out) }, NC_ERR_NUMERIC);
    unsafe { nc_model_free(ptr::null_mut()) };
}

#[test]
fn auc_and_generation() {
    let scores = [0.1, 0.4, 0.35, 0.8];
    let labels = [0u8, 0, 1, 1];
    let mut out = 0.0;
    assert_eq!(unsafe { nc_auc(scores.as_ptr(), labels.as_ptr(), 4, &mut out) }, NC_OK);
    assert_eq!(out, 0.75);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.jsonl");
    let c = CString::new(path.to_str().unwrap()).unwrap();
    let mut frac = 0.0;
    assert_eq!(unsafe { nc_generate_synthetic(10, 5, 82, c.as_ptr(), &mut frac) }, NC_OK);
    let data = neucredit::data::load_dataset(&path).unwrap();
    assert_eq!(data.len(), 10);
    assert_eq!(frac, data.positive_fraction());
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/neucredit.h");
    let Ok(out) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", header])
        .output()
    else {
        eprintln!("no C compiler; skipping");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
