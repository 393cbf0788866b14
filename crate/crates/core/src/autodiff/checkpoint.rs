//! Binary parameter checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    4 bytes  "RRCK"
//! version  u32      1
//! count    u32      number of parameters
//! repeated count times:
//!   name_len u32, name utf-8 bytes
//!   ndim     u32, dims u64 x ndim
//!   data     f64 x prod(dims)
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, WriteBytesExt};

use super::array::{numel, Array};
use super::params::ParameterSet;
use crate::binio::{write_str, FieldReader};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"RRCK";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_checkpoint<W: Write>(w: &mut W, params: &ParameterSet) -> Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_u32::<LittleEndian>(CHECKPOINT_VERSION)?;
    w.write_u32::<LittleEndian>(params.len() as u32)?;
    for (_, name, value) in params.iter() {
        write_str(w, name)?;
        w.write_u32::<LittleEndian>(value.shape().len() as u32)?;
        for &d in value.shape() {
            w.write_u64::<LittleEndian>(d as u64)?;
        }
        for &x in value.data() {
            w.write_f64::<LittleEndian>(x)?;
        }
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(r: R) -> Result<ParameterSet> {
    let mut r = FieldReader::new(r, "checkpoint");
    r.magic(CHECKPOINT_MAGIC)?;
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(r.err(4, format!("unsupported version {version}")));
    }
    let count = r.u32()?;
    let mut params = ParameterSet::new();
    for _ in 0..count {
        let at = r.pos();
        let name = r.string()?;
        let ndim = r.u32()? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(r.u64()? as usize);
        }
        let mut data = vec![0.0; numel(&shape)];
        r.f64s(&mut data)?;
        if params.id(&name).is_some() {
            return Err(r.err(at, format!("duplicate parameter {name}")));
        }
        params.insert(name, Array::new(shape, data));
    }
    r.end()?;
    Ok(params)
}

pub fn save_checkpoint(path: impl AsRef<Path>, params: &ParameterSet) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| Error::file(path, e))?;
    let mut w = BufWriter::new(f);
    write_checkpoint(&mut w, params)?;
    w.flush().map_err(|e| Error::file(path, e))?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ParameterSet> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::file(path, e))?;
    read_checkpoint(BufReader::new(f))
}

/// Copies checkpoint values into `target`, which must have the same names
/// and shapes.
pub fn restore_into(target: &mut ParameterSet, loaded: &ParameterSet) -> Result<()> {
    if target.len() != loaded.len() {
        return Err(Error::Config(format!(
            "checkpoint has {} parameters, model expects {}",
            loaded.len(),
            target.len()
        )));
    }
    for id in target.ids().collect::<Vec<_>>() {
        let name = target.name(id).to_string();
        let src = loaded
            .by_name(&name)
            .ok_or_else(|| Error::Config(format!("checkpoint lacks parameter {name}")))?;
        if src.shape() != target.get(id).shape() {
            return Err(Error::Config(format!(
                "parameter {name}: checkpoint shape {:?}, model shape {:?}",
                src.shape(),
                target.get(id).shape()
            )));
        }
        *target.get_mut(id) = src.clone();
    }
    Ok(())
}
