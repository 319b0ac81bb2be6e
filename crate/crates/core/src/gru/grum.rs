//! GRUM model files: magic `GRUM`, u32 LE header length, JSON header, then
//! every parameter as little-endian `f32` in [`Params::tensors`] order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{GruError, GruModel, ModelSpec, Normalization, Params, Real};
use crate::container::{check_version, read_f32s, read_header, write_f32s, write_header, FORMAT_VERSION};

pub const GRUM_MAGIC: [u8; 4] = *b"GRUM";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    layer_dims: Vec<usize>,
    fc_dims: Vec<usize>,
    class_names: Vec<String>,
    input_dim: usize,
    time_steps: usize,
    normalization: Normalization,
    seed: u64,
    format_version: u32,
}

/// Writes the model. Values are stored as `f32`, so `f32` models round-trip
/// exactly.
pub fn write_model<T: Real, W: Write>(w: &mut W, model: &GruModel<T>) -> Result<(), GruError> {
    model.check_shapes()?;
    let s = &model.spec;
    let header = Header {
        layer_dims: s.layer_dims.clone(),
        fc_dims: s.fc_dims.clone(),
        class_names: s.class_names.clone(),
        input_dim: s.input_dim,
        time_steps: s.time_steps,
        normalization: model.normalization,
        seed: model.seed,
        format_version: FORMAT_VERSION,
    };
    write_header(w, GRUM_MAGIC, &header)?;
    let values = model
        .params
        .tensors()
        .into_iter()
        .flat_map(|t| t.iter().map(|v| v.to_f32().unwrap()))
        .collect::<Vec<_>>();
    write_f32s(w, values).map_err(crate::container::FormatError::from)?;
    Ok(())
}

pub fn read_model<T: Real, R: Read>(r: &mut R) -> Result<GruModel<T>, GruError> {
    let h: Header = read_header(r, GRUM_MAGIC)?;
    check_version(h.format_version)?;
    let spec = ModelSpec {
        input_dim: h.input_dim,
        time_steps: h.time_steps,
        layer_dims: h.layer_dims,
        fc_dims: h.fc_dims,
        class_names: h.class_names,
    };
    spec.validate()?;
    let mut params = Params::<T>::zeros(spec.input_dim, &spec.layer_dims, &spec.fc_dims);
    let values = read_f32s(r, params.num_params())?;
    if values.iter().any(|v| !v.is_finite()) {
        return Err(crate::container::FormatError::Invalid("non-finite parameter".into()).into());
    }
    let mut it = values.into_iter();
    for t in params.tensors_mut() {
        for (d, v) in t.iter_mut().zip(&mut it) {
            *d = T::from_f32(v).unwrap();
        }
    }
    Ok(GruModel {
        spec,
        normalization: h.normalization,
        seed: h.seed,
        params,
    })
}

pub fn save_model<T: Real>(path: impl AsRef<Path>, model: &GruModel<T>) -> Result<(), GruError> {
    let mut w = BufWriter::new(File::create(path).map_err(crate::container::FormatError::from)?);
    write_model(&mut w, model)?;
    w.flush().map_err(crate::container::FormatError::from)?;
    Ok(())
}

pub fn load_model<T: Real>(path: impl AsRef<Path>) -> Result<GruModel<T>, GruError> {
    let mut r = BufReader::new(File::open(path).map_err(crate::container::FormatError::from)?);
    read_model(&mut r)
}
