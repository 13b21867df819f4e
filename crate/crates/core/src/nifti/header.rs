//! Decoding and encoding of the 348-byte NIfTI-1 header.

use super::NiftiError;

/// Size of a NIfTI-1 header in bytes.
pub const HEADER_SIZE: usize = 348;
/// Magic for single-file NIfTI-1 (`.nii`).
pub const MAGIC_SINGLE: [u8; 4] = *b"n+1\0";
/// Magic for the `.hdr`/`.img` pair variant, which this reader rejects.
pub const MAGIC_PAIR: [u8; 4] = *b"ni1\0";
/// Voxel offset used by the writer: header plus the 4-byte extension flag.
pub const WRITER_VOX_OFFSET: usize = 352;

/// Byte order of a header relative to the host.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ByteOrder {
    #[default]
    Native,
    Swapped,
}

/// Voxel storage types understood by the reader.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataType {
    Uint8,
    Int16,
    Int32,
    Float32,
    Float64,
}

impl DataType {
    pub fn from_code(code: i16) -> Result<Self, NiftiError> {
        match code {
            2 => Ok(Self::Uint8),
            4 => Ok(Self::Int16),
            8 => Ok(Self::Int32),
            16 => Ok(Self::Float32),
            64 => Ok(Self::Float64),
            other => Err(NiftiError::UnsupportedDatatype(other)),
        }
    }

    pub fn code(self) -> i16 {
        match self {
            Self::Uint8 => 2,
            Self::Int16 => 4,
            Self::Int32 => 8,
            Self::Float32 => 16,
            Self::Float64 => 64,
        }
    }

    pub fn bitpix(self) -> i16 {
        match self {
            Self::Uint8 => 8,
            Self::Int16 => 16,
            Self::Int32 => 32,
            Self::Float32 => 32,
            Self::Float64 => 64,
        }
    }

    pub fn bytes_per_voxel(self) -> usize {
        self.bitpix() as usize / 8
    }
}

/// Inspects the `sizeof_hdr` field to find the byte order of a header.
pub fn detect_endianness(bytes: &[u8]) -> Result<ByteOrder, NiftiError> {
    let first: [u8; 4] = bytes
        .get(..4)
        .and_then(|b| b.try_into().ok())
        .ok_or(NiftiError::NotNifti("fewer than 4 bytes"))?;
    let value = i32::from_ne_bytes(first);
    if value == HEADER_SIZE as i32 {
        Ok(ByteOrder::Native)
    } else if value.swap_bytes() == HEADER_SIZE as i32 {
        Ok(ByteOrder::Swapped)
    } else {
        Err(NiftiError::NotNifti(
            "sizeof_hdr is not 348 in either byte order",
        ))
    }
}

/// A fully decoded NIfTI-1 header.
///
/// Every field of the on-disk layout is kept so that a header can be written
/// back unchanged. Orientation fields (`qform_*`, `quatern_*`, `qoffset_*`,
/// `sform_code`, `srow_*`) are carried through but never interpreted.
#[derive(Debug, Clone, PartialEq)]
pub struct NiftiHeader {
    pub sizeof_hdr: i32,
    pub data_type: [u8; 10],
    pub db_name: [u8; 18],
    pub extents: i32,
    pub session_error: i16,
    pub regular: u8,
    pub dim_info: u8,
    pub dim: [i16; 8],
    pub intent_p1: f32,
    pub intent_p2: f32,
    pub intent_p3: f32,
    pub intent_code: i16,
    pub datatype_code: i16,
    pub bitpix: i16,
    pub slice_start: i16,
    pub pixdim: [f32; 8],
    pub vox_offset: f32,
    pub scl_slope: f32,
    pub scl_inter: f32,
    pub slice_end: i16,
    pub slice_code: u8,
    pub xyzt_units: u8,
    pub cal_max: f32,
    pub cal_min: f32,
    pub slice_duration: f32,
    pub toffset: f32,
    pub glmax: i32,
    pub glmin: i32,
    pub descrip: [u8; 80],
    pub aux_file: [u8; 24],
    pub qform_code: i16,
    pub sform_code: i16,
    pub quatern_b: f32,
    pub quatern_c: f32,
    pub quatern_d: f32,
    pub qoffset_x: f32,
    pub qoffset_y: f32,
    pub qoffset_z: f32,
    pub srow_x: [f32; 4],
    pub srow_y: [f32; 4],
    pub srow_z: [f32; 4],
    pub intent_name: [u8; 16],
    pub magic: [u8; 4],
    pub byte_order: ByteOrder,
}

impl Default for NiftiHeader {
    fn default() -> Self {
        NiftiHeader {
            sizeof_hdr: HEADER_SIZE as i32,
            data_type: [0; 10],
            db_name: [0; 18],
            extents: 0,
            session_error: 0,
            regular: 0,
            dim_info: 0,
            dim: [3, 1, 1, 1, 1, 1, 1, 1],
            intent_p1: 0.0,
            intent_p2: 0.0,
            intent_p3: 0.0,
            intent_code: 0,
            datatype_code: DataType::Float64.code(),
            bitpix: DataType::Float64.bitpix(),
            slice_start: 0,
            pixdim: [1.0; 8],
            vox_offset: WRITER_VOX_OFFSET as f32,
            scl_slope: 1.0,
            scl_inter: 0.0,
            slice_end: 0,
            slice_code: 0,
            xyzt_units: 0,
            cal_max: 0.0,
            cal_min: 0.0,
            slice_duration: 0.0,
            toffset: 0.0,
            glmax: 0,
            glmin: 0,
            descrip: [0; 80],
            aux_file: [0; 24],
            qform_code: 0,
            sform_code: 0,
            quatern_b: 0.0,
            quatern_c: 0.0,
            quatern_d: 0.0,
            qoffset_x: 0.0,
            qoffset_y: 0.0,
            qoffset_z: 0.0,
            srow_x: [0.0; 4],
            srow_y: [0.0; 4],
            srow_z: [0.0; 4],
            intent_name: [0; 16],
            magic: MAGIC_SINGLE,
            byte_order: ByteOrder::Native,
        }
    }
}

struct Decoder<'a> {
    bytes: &'a [u8],
    pos: usize,
    swap: bool,
}

impl<'a> Decoder<'a> {
    fn take<const N: usize>(&mut self) -> [u8; N] {
        // callers guarantee HEADER_SIZE bytes are present
        let mut out = [0u8; N];
        out.copy_from_slice(&self.bytes[self.pos..self.pos + N]);
        self.pos += N;
        if self.swap {
            out.reverse();
        }
        out
    }

    fn raw<const N: usize>(&mut self) -> [u8; N] {
        let mut out = [0u8; N];
        out.copy_from_slice(&self.bytes[self.pos..self.pos + N]);
        self.pos += N;
        out
    }

    fn u8(&mut self) -> u8 {
        self.raw::<1>()[0]
    }

    fn i16(&mut self) -> i16 {
        i16::from_ne_bytes(self.take())
    }

    fn i32(&mut self) -> i32 {
        i32::from_ne_bytes(self.take())
    }

    fn f32(&mut self) -> f32 {
        f32::from_ne_bytes(self.take())
    }

    fn i16s<const N: usize>(&mut self) -> [i16; N] {
        std::array::from_fn(|_| self.i16())
    }

    fn f32s<const N: usize>(&mut self) -> [f32; N] {
        std::array::from_fn(|_| self.f32())
    }
}

impl NiftiHeader {
    /// Decodes and validates a header from the first 348 bytes of `bytes`.
    pub fn parse(bytes: &[u8]) -> Result<Self, NiftiError> {
        if bytes.len() < HEADER_SIZE {
            return Err(NiftiError::TruncatedHeader(bytes.len()));
        }
        let byte_order = detect_endianness(bytes)?;
        let mut d = Decoder {
            bytes: &bytes[..HEADER_SIZE],
            pos: 0,
            swap: byte_order == ByteOrder::Swapped,
        };
        let header = NiftiHeader {
            sizeof_hdr: d.i32(),
            data_type: d.raw(),
            db_name: d.raw(),
            extents: d.i32(),
            session_error: d.i16(),
            regular: d.u8(),
            dim_info: d.u8(),
            dim: d.i16s(),
            intent_p1: d.f32(),
            intent_p2: d.f32(),
            intent_p3: d.f32(),
            intent_code: d.i16(),
            datatype_code: d.i16(),
            bitpix: d.i16(),
            slice_start: d.i16(),
            pixdim: d.f32s(),
            vox_offset: d.f32(),
            scl_slope: d.f32(),
            scl_inter: d.f32(),
            slice_end: d.i16(),
            slice_code: d.u8(),
            xyzt_units: d.u8(),
            cal_max: d.f32(),
            cal_min: d.f32(),
            slice_duration: d.f32(),
            toffset: d.f32(),
            glmax: d.i32(),
            glmin: d.i32(),
            descrip: d.raw(),
            aux_file: d.raw(),
            qform_code: d.i16(),
            sform_code: d.i16(),
            quatern_b: d.f32(),
            quatern_c: d.f32(),
            quatern_d: d.f32(),
            qoffset_x: d.f32(),
            qoffset_y: d.f32(),
            qoffset_z: d.f32(),
            srow_x: d.f32s(),
            srow_y: d.f32s(),
            srow_z: d.f32s(),
            intent_name: d.raw(),
            magic: d.raw(),
            byte_order,
        };
        debug_assert_eq!(d.pos, HEADER_SIZE);
        header.validate()?;
        Ok(header)
    }

    /// Checks the structural invariants the reader relies on.
    pub fn validate(&self) -> Result<(), NiftiError> {
        if self.sizeof_hdr != HEADER_SIZE as i32 {
            return Err(NiftiError::NotNifti("sizeof_hdr is not 348"));
        }
        if self.magic == MAGIC_PAIR {
            return Err(NiftiError::NotNifti(
                "paired .hdr/.img files are not supported",
            ));
        }
        if self.magic != MAGIC_SINGLE {
            return Err(NiftiError::NotNifti("bad magic"));
        }
        let datatype = DataType::from_code(self.datatype_code)?;
        if datatype.bitpix() != self.bitpix {
            return Err(NiftiError::BitpixMismatch {
                datatype: self.datatype_code,
                bitpix: self.bitpix,
            });
        }
        let rank = self.dim[0];
        if !(1..=4).contains(&rank) {
            return Err(NiftiError::BadDims(format!("rank {rank} outside 1..=4")));
        }
        for (axis, &extent) in self.dim[1..=rank as usize].iter().enumerate() {
            if extent < 1 {
                return Err(NiftiError::BadDims(format!(
                    "dim[{}] = {extent} must be >= 1",
                    axis + 1
                )));
            }
        }
        if !self.vox_offset.is_finite()
            || self.vox_offset < WRITER_VOX_OFFSET as f32
            || self.vox_offset.fract() != 0.0
        {
            return Err(NiftiError::BadVoxOffset(self.vox_offset));
        }
        Ok(())
    }

    pub fn datatype(&self) -> Result<DataType, NiftiError> {
        DataType::from_code(self.datatype_code)
    }

    pub fn rank(&self) -> usize {
        self.dim[0].clamp(0, 7) as usize
    }

    /// Extent along axis `axis` (1-based), treating axes beyond the rank as 1.
    fn extent(&self, axis: usize) -> usize {
        if axis <= self.rank() {
            self.dim[axis].max(0) as usize
        } else {
            1
        }
    }

    /// Spatial extents `(nx, ny, nz)`.
    pub fn spatial_dims(&self) -> [usize; 3] {
        [self.extent(1), self.extent(2), self.extent(3)]
    }

    /// Number of time points (1 for rank <= 3).
    pub fn time_points(&self) -> usize {
        self.extent(4)
    }

    pub fn voxel_offset(&self) -> usize {
        self.vox_offset as usize
    }

    /// Encodes the header as 348 bytes in host byte order.
    pub fn to_bytes(&self) -> [u8; HEADER_SIZE] {
        let mut out = Vec::with_capacity(HEADER_SIZE);
        out.extend_from_slice(&self.sizeof_hdr.to_ne_bytes());
        out.extend_from_slice(&self.data_type);
        out.extend_from_slice(&self.db_name);
        out.extend_from_slice(&self.extents.to_ne_bytes());
        out.extend_from_slice(&self.session_error.to_ne_bytes());
        out.push(self.regular);
        out.push(self.dim_info);
        self.dim
            .iter()
            .for_each(|v| out.extend_from_slice(&v.to_ne_bytes()));
        for v in [self.intent_p1, self.intent_p2, self.intent_p3] {
            out.extend_from_slice(&v.to_ne_bytes());
        }
        for v in [
            self.intent_code,
            self.datatype_code,
            self.bitpix,
            self.slice_start,
        ] {
            out.extend_from_slice(&v.to_ne_bytes());
        }
        self.pixdim
            .iter()
            .for_each(|v| out.extend_from_slice(&v.to_ne_bytes()));
        for v in [self.vox_offset, self.scl_slope, self.scl_inter] {
            out.extend_from_slice(&v.to_ne_bytes());
        }
        out.extend_from_slice(&self.slice_end.to_ne_bytes());
        out.push(self.slice_code);
        out.push(self.xyzt_units);
        for v in [
            self.cal_max,
            self.cal_min,
            self.slice_duration,
            self.toffset,
        ] {
            out.extend_from_slice(&v.to_ne_bytes());
        }
        out.extend_from_slice(&self.glmax.to_ne_bytes());
        out.extend_from_slice(&self.glmin.to_ne_bytes());
        out.extend_from_slice(&self.descrip);
        out.extend_from_slice(&self.aux_file);
        out.extend_from_slice(&self.qform_code.to_ne_bytes());
        out.extend_from_slice(&self.sform_code.to_ne_bytes());
        for v in [
            self.quatern_b,
            self.quatern_c,
            self.quatern_d,
            self.qoffset_x,
            self.qoffset_y,
            self.qoffset_z,
        ] {
            out.extend_from_slice(&v.to_ne_bytes());
        }
        for row in [&self.srow_x, &self.srow_y, &self.srow_z] {
            row.iter()
                .for_each(|v| out.extend_from_slice(&v.to_ne_bytes()));
        }
        out.extend_from_slice(&self.intent_name);
        out.extend_from_slice(&self.magic);
        out.try_into().expect("header layout is 348 bytes")
    }
}

/// Reverses the byte order of every multi-byte field of an encoded header.
///
/// Used to build foreign-endian fixtures; char arrays are left untouched.
pub fn swap_header_bytes(bytes: &[u8; HEADER_SIZE]) -> [u8; HEADER_SIZE] {
    // (offset, field width, count) for each numeric run of the layout
    const NUMERIC: &[(usize, usize, usize)] = &[
        (0, 4, 1),
        (32, 4, 1),
        (36, 2, 1),
        (40, 2, 8),
        (56, 4, 3),
        (68, 2, 4),
        (76, 4, 8),
        (108, 4, 3),
        (120, 2, 1),
        (124, 4, 4),
        (140, 4, 2),
        (252, 2, 2),
        (256, 4, 6),
        (280, 4, 12),
    ];
    let mut out = *bytes;
    for &(offset, width, count) in NUMERIC {
        for i in 0..count {
            let start = offset + i * width;
            out[start..start + width].reverse();
        }
    }
    out
}
