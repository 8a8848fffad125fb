//! On-disk dataset layout: `manifest.json`, `instances/NNNNNN.json` and
//! `clouds/NNNNNN_k.spcd`. All JSON is written with sorted keys so reruns
//! are byte-identical.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DatagenError, Instance};
use crate::geometry::spcd::{read_spcd, write_spcd};
use crate::scene::{ObjectModel, Relation, Scene};

pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub master_seed: u64,
    pub count: u64,
    pub relation_counts: BTreeMap<String, u64>,
    pub catalog: Vec<ObjectModel>,
    pub split: String,
}

/// Instance metadata as stored in `instances/NNNNNN.json`; clouds live in
/// sibling SPCD files named after the instance id and object index.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct InstanceRecord {
    id: String,
    initial_scene: Scene,
    goal_scene: Scene,
    relation: Relation,
    movable_index: usize,
    reference_indices: Vec<usize>,
    instruction: String,
    cloud_files: Vec<String>,
}

fn canonical_json<T: Serialize>(value: &T) -> Result<Vec<u8>, DatagenError> {
    // to_value stores objects as sorted maps, so serialization is stable
    let v = serde_json::to_value(value).map_err(|e| DatagenError::Format(e.to_string()))?;
    let mut bytes = serde_json::to_vec_pretty(&v).map_err(|e| DatagenError::Format(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn from_json<T: for<'de> Deserialize<'de>>(bytes: &[u8]) -> Result<T, DatagenError> {
    serde_json::from_slice(bytes).map_err(|e| DatagenError::Format(e.to_string()))
}

pub fn write_dataset(
    dir: &Path,
    master_seed: u64,
    split: &str,
    catalog: &[ObjectModel],
    instances: &[Instance],
) -> Result<DatasetManifest, DatagenError> {
    fs::create_dir_all(dir.join("instances"))?;
    fs::create_dir_all(dir.join("clouds"))?;

    let mut relation_counts: BTreeMap<String, u64> = BTreeMap::new();
    for inst in instances {
        *relation_counts.entry(inst.relation.name().to_string()).or_insert(0) += 1;

        let mut cloud_files = Vec::with_capacity(inst.clouds.len());
        for (k, cloud) in inst.clouds.iter().enumerate() {
            let name = format!("{}_{k}.spcd", inst.id);
            let mut w = BufWriter::new(fs::File::create(dir.join("clouds").join(&name))?);
            write_spcd(&mut w, cloud)?;
            cloud_files.push(name);
        }

        let record = InstanceRecord {
            id: inst.id.clone(),
            initial_scene: inst.initial_scene.clone(),
            goal_scene: inst.goal_scene.clone(),
            relation: inst.relation,
            movable_index: inst.movable_index,
            reference_indices: inst.reference_indices.clone(),
            instruction: inst.instruction.clone(),
            cloud_files,
        };
        fs::write(
            dir.join("instances").join(format!("{}.json", inst.id)),
            canonical_json(&record)?,
        )?;
    }

    let manifest = DatasetManifest {
        version: DATASET_VERSION,
        master_seed,
        count: instances.len() as u64,
        relation_counts,
        catalog: catalog.to_vec(),
        split: split.to_string(),
    };
    fs::write(dir.join("manifest.json"), canonical_json(&manifest)?)?;
    Ok(manifest)
}

pub fn read_dataset(dir: &Path) -> Result<(DatasetManifest, Vec<Instance>), DatagenError> {
    let manifest: DatasetManifest = from_json(&fs::read(dir.join("manifest.json"))?)?;
    if manifest.version != DATASET_VERSION {
        return Err(DatagenError::Format(format!(
            "unsupported dataset version {}",
            manifest.version
        )));
    }

    let mut names: Vec<String> = fs::read_dir(dir.join("instances"))?
        .map(|e| Ok(e?.file_name().to_string_lossy().into_owned()))
        .collect::<Result<_, DatagenError>>()?;
    names.sort();
    if names.len() as u64 != manifest.count {
        return Err(DatagenError::Format(format!(
            "manifest says {} instances but {} files are present",
            manifest.count,
            names.len()
        )));
    }

    let mut instances = Vec::with_capacity(names.len());
    for name in names {
        let record: InstanceRecord = from_json(&fs::read(dir.join("instances").join(&name))?)?;
        let mut clouds = Vec::with_capacity(record.cloud_files.len());
        for f in &record.cloud_files {
            let mut r = BufReader::new(fs::File::open(dir.join("clouds").join(f))?);
            clouds.push(read_spcd(&mut r)?);
        }
        instances.push(Instance {
            id: record.id,
            initial_scene: record.initial_scene,
            goal_scene: record.goal_scene,
            relation: record.relation,
            movable_index: record.movable_index,
            reference_indices: record.reference_indices,
            instruction: record.instruction,
            clouds,
        });
    }
    Ok((manifest, instances))
}
