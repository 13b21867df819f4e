//! NIfTI-1 single-file reader and writer.
//!
//! Reading accepts plain `.nii` and gzip-wrapped `.nii.gz` files (detected by
//! the gzip magic bytes, not the extension) in either byte order. Voxels are
//! widened to `f64` with `scl_slope`/`scl_inter` applied and split into one
//! [`Volume`] per time point. Writing always produces native-order float64.

mod header;

pub use header::{
    detect_endianness, swap_header_bytes, ByteOrder, DataType, NiftiHeader, HEADER_SIZE,
    MAGIC_PAIR, MAGIC_SINGLE, WRITER_VOX_OFFSET,
};

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use thiserror::Error;

use crate::volume::{Volume, VolumeError};

const GZIP_MAGIC: [u8; 2] = [0x1F, 0x8B];

#[derive(Debug, Error)]
pub enum NiftiError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a NIfTI-1 single file: {0}")]
    NotNifti(&'static str),
    #[error("header needs 348 bytes, got {0}")]
    TruncatedHeader(usize),
    #[error("unsupported datatype code {0}")]
    UnsupportedDatatype(i16),
    #[error("bitpix {bitpix} is inconsistent with datatype code {datatype}")]
    BitpixMismatch { datatype: i16, bitpix: i16 },
    #[error("invalid dimensions: {0}")]
    BadDims(String),
    #[error("invalid vox_offset {0}")]
    BadVoxOffset(f32),
    #[error("voxel data truncated: need {expected} bytes, file has {actual}")]
    TruncatedData { expected: usize, actual: usize },
    #[error("volume dims {volume:?} do not match reference header dims {reference:?}")]
    ReferenceMismatch {
        volume: [usize; 3],
        reference: [usize; 3],
    },
    #[error(transparent)]
    Volume(#[from] VolumeError),
}

/// NIfTI intensity scaling; a zero slope means the stored value is used as is.
#[inline]
pub fn apply_scaling(raw: f64, slope: f64, inter: f64) -> f64 {
    if slope == 0.0 {
        raw
    } else {
        slope * raw + inter
    }
}

/// Result of decoding one file.
#[derive(Debug, Clone)]
pub struct LoadedNifti {
    pub header: NiftiHeader,
    pub volumes: Vec<Volume>,
    /// NaN/Inf voxels that were replaced with 0.0.
    pub non_finite_replaced: usize,
}

/// Reads every time point of a `.nii` / `.nii.gz` file.
pub fn read_volumes(path: impl AsRef<Path>) -> Result<Vec<Volume>, NiftiError> {
    load(path).map(|loaded| loaded.volumes)
}

/// Like [`read_volumes`] but also returns the header and the load report.
pub fn load(path: impl AsRef<Path>) -> Result<LoadedNifti, NiftiError> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    decode(&bytes, &name)
}

/// Decodes an in-memory file image, gunzipping it first when needed.
/// Volume labels are `"<name>[t]"`.
pub fn decode(bytes: &[u8], name: &str) -> Result<LoadedNifti, NiftiError> {
    if bytes.starts_with(&GZIP_MAGIC) {
        let mut inflated = Vec::new();
        GzDecoder::new(bytes).read_to_end(&mut inflated)?;
        decode_plain(&inflated, name)
    } else {
        decode_plain(bytes, name)
    }
}

fn decode_plain(bytes: &[u8], name: &str) -> Result<LoadedNifti, NiftiError> {
    let header = NiftiHeader::parse(bytes)?;
    let datatype = header.datatype()?;
    let [nx, ny, nz] = header.spatial_dims();
    let nt = header.time_points();
    let too_big = || NiftiError::BadDims("voxel count overflows".into());
    let per_volume = nx
        .checked_mul(ny)
        .and_then(|n| n.checked_mul(nz))
        .ok_or_else(too_big)?;
    let data_bytes = per_volume
        .checked_mul(nt)
        .and_then(|n| n.checked_mul(datatype.bytes_per_voxel()))
        .ok_or_else(too_big)?;
    let offset = header.voxel_offset();
    let expected = offset.checked_add(data_bytes).ok_or_else(too_big)?;
    if bytes.len() < expected {
        return Err(NiftiError::TruncatedData {
            expected,
            actual: bytes.len(),
        });
    }

    let swap = header.byte_order == ByteOrder::Swapped;
    let raw = decode_voxels(&bytes[offset..expected], datatype, swap);
    let slope = f64::from(header.scl_slope);
    let inter = f64::from(header.scl_inter);
    let mut non_finite_replaced = 0;
    let spacing = [1, 2, 3].map(|i| f64::from(header.pixdim[i]));

    let volumes = raw
        .chunks_exact(per_volume)
        .enumerate()
        .map(|(t, chunk)| {
            let data: Vec<f64> = chunk
                .iter()
                .map(|&v| {
                    let scaled = apply_scaling(v, slope, inter);
                    if scaled.is_finite() {
                        scaled
                    } else {
                        non_finite_replaced += 1;
                        0.0
                    }
                })
                .collect();
            Volume::new([nx, ny, nz], spacing, data, format!("{name}[{t}]"))
        })
        .collect::<Result<Vec<_>, _>>()?;

    Ok(LoadedNifti {
        header,
        volumes,
        non_finite_replaced,
    })
}

fn decode_voxels(bytes: &[u8], datatype: DataType, swap: bool) -> Vec<f64> {
    macro_rules! widen {
        ($ty:ty, $n:literal) => {
            bytes
                .chunks_exact($n)
                .map(|c| {
                    let mut b: [u8; $n] = c.try_into().unwrap();
                    if swap {
                        b.reverse();
                    }
                    <$ty>::from_ne_bytes(b) as f64
                })
                .collect()
        };
    }
    match datatype {
        DataType::Uint8 => bytes.iter().map(|&b| f64::from(b)).collect(),
        DataType::Int16 => widen!(i16, 2),
        DataType::Int32 => widen!(i32, 4),
        DataType::Float32 => widen!(f32, 4),
        DataType::Float64 => widen!(f64, 8),
    }
}

/// Builds the header the writer emits for `volume`.
///
/// Non-geometric metadata (orientation, description, intent) is copied from
/// `reference` when given; its spatial dims must equal the volume's.
pub fn header_for(
    volume: &Volume,
    reference: Option<&NiftiHeader>,
) -> Result<NiftiHeader, NiftiError> {
    let dims = volume.dims();
    if let Some(reference) = reference {
        if reference.spatial_dims() != dims {
            return Err(NiftiError::ReferenceMismatch {
                volume: dims,
                reference: reference.spatial_dims(),
            });
        }
    }
    let mut dim = [3, 1, 1, 1, 1, 1, 1, 1];
    for (slot, &extent) in dim[1..4].iter_mut().zip(&dims) {
        *slot = i16::try_from(extent)
            .map_err(|_| NiftiError::BadDims(format!("extent {extent} exceeds i16")))?;
    }
    let mut header = reference.cloned().unwrap_or_default();
    let [sx, sy, sz] = volume.spacing();
    header.pixdim[1] = sx as f32;
    header.pixdim[2] = sy as f32;
    header.pixdim[3] = sz as f32;
    if header.pixdim[0] != -1.0 {
        header.pixdim[0] = 1.0;
    }
    Ok(NiftiHeader {
        sizeof_hdr: HEADER_SIZE as i32,
        dim,
        datatype_code: DataType::Float64.code(),
        bitpix: DataType::Float64.bitpix(),
        vox_offset: WRITER_VOX_OFFSET as f32,
        scl_slope: 1.0,
        scl_inter: 0.0,
        magic: MAGIC_SINGLE,
        byte_order: ByteOrder::Native,
        ..header
    })
}

/// Encodes `volume` as an uncompressed float64 NIfTI-1 file image.
pub fn write_volume(
    volume: &Volume,
    reference: Option<&NiftiHeader>,
) -> Result<Vec<u8>, NiftiError> {
    let header = header_for(volume, reference)?;
    let mut out = Vec::with_capacity(WRITER_VOX_OFFSET + volume.len() * 8);
    out.extend_from_slice(&header.to_bytes());
    // extension flag: no extensions
    out.extend_from_slice(&[0u8; 4]);
    for v in volume.data() {
        out.extend_from_slice(&v.to_ne_bytes());
    }
    Ok(out)
}

/// Gzip-wraps a file image. The gzip header carries no timestamp, so output
/// is reproducible.
pub fn gzip(bytes: &[u8]) -> Result<Vec<u8>, NiftiError> {
    let mut encoder = GzEncoder::new(Vec::new(), Compression::default());
    encoder.write_all(bytes)?;
    Ok(encoder.finish()?)
}

/// Writes `volume` to `path`, gzip-compressed when the name ends in `.gz`.
pub fn write_volume_file(
    path: impl AsRef<Path>,
    volume: &Volume,
    reference: Option<&NiftiHeader>,
) -> Result<(), NiftiError> {
    let path = path.as_ref();
    let mut bytes = write_volume(volume, reference)?;
    if path.extension().is_some_and(|ext| ext == "gz") {
        bytes = gzip(&bytes)?;
    }
    fs::write(path, bytes)?;
    Ok(())
}
