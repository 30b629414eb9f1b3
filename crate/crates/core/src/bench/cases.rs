//! Writing the built-in cases to disk and reading case sets back.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{BenchError, VariantSet, Variants};
use crate::loadcase::{builtin_cases, parse_load_case, LoadCase, VariantSpec, FORCE_SCALES, GEOM_SCALES};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub geom_scales: Vec<f64>,
    pub force_scales: Vec<f64>,
    pub cases: Vec<ManifestEntry>,
    pub total_configurations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub problem_id: String,
    pub file: String,
    pub variants: Vec<VariantSpec>,
}

fn write(path: &Path, text: &str) -> Result<(), BenchError> {
    std::fs::write(path, text).map_err(|e| BenchError::io(path, e))
}

/// Writes one `<PROBLEM_ID>.json` per built-in case and the manifest.
pub fn gen_cases(out_dir: &Path) -> Result<Manifest, BenchError> {
    std::fs::create_dir_all(out_dir).map_err(|e| BenchError::io(out_dir, e))?;
    let variants = Variants::Named(VariantSet::All).specs();
    let mut entries = Vec::new();
    for case in builtin_cases() {
        let file = format!("{}.json", case.problem_id);
        write(&out_dir.join(&file), &(case.to_json_pretty() + "\n"))?;
        entries.push(ManifestEntry {
            problem_id: case.problem_id.clone(),
            file,
            variants: variants.clone(),
        });
    }
    let manifest = Manifest {
        geom_scales: GEOM_SCALES.to_vec(),
        force_scales: FORCE_SCALES.to_vec(),
        total_configurations: entries.iter().map(|e| e.variants.len()).sum(),
        cases: entries,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write(&out_dir.join(MANIFEST_FILE), &(text + "\n"))?;
    Ok(manifest)
}

fn read_case(path: &Path) -> Result<LoadCase, BenchError> {
    let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    parse_load_case(&text).map_err(|source| BenchError::Case {
        path: path.to_path_buf(),
        source,
    })
}

/// `builtin`, a directory (manifest order if it has one, else every
/// `*.json` by file name) or a single case file.
pub fn load_cases(source: &str) -> Result<Vec<LoadCase>, BenchError> {
    if source == "builtin" {
        return Ok(builtin_cases());
    }
    let path = PathBuf::from(source);
    if !path.is_dir() {
        return Ok(vec![read_case(&path)?]);
    }
    let manifest_path = path.join(MANIFEST_FILE);
    let files: Vec<PathBuf> = if manifest_path.exists() {
        let text = std::fs::read_to_string(&manifest_path).map_err(|e| BenchError::io(&manifest_path, e))?;
        let m: Manifest = serde_json::from_str(&text).map_err(|e| BenchError::Parse {
            path: manifest_path.clone(),
            message: e.to_string(),
        })?;
        m.cases.iter().map(|c| path.join(&c.file)).collect()
    } else {
        let entries = std::fs::read_dir(&path).map_err(|e| BenchError::io(&path, e))?;
        let mut files = Vec::new();
        for entry in entries {
            let p = entry.map_err(|e| BenchError::io(&path, e))?.path();
            if p.extension().is_some_and(|x| x == "json") {
                files.push(p);
            }
        }
        files.sort();
        files
    };
    if files.is_empty() {
        return Err(BenchError::Config(format!("{}: no case files", path.display())));
    }
    files.iter().map(|p| read_case(p)).collect()
}
