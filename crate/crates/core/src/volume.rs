use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VolumeError {
    #[error("data length {len} does not match {nx}x{ny}x{nz}")]
    LengthMismatch {
        len: usize,
        nx: usize,
        ny: usize,
        nz: usize,
    },
    #[error("volume extents must be positive, got {0:?}")]
    EmptyExtent([usize; 3]),
    #[error("non-finite voxel at flat index {0}")]
    NonFinite(usize),
}

/// A dense 3D grid of intensities stored x-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    dims: [usize; 3],
    spacing: [f64; 3],
    data: Vec<f64>,
    label: String,
}

impl Volume {
    pub fn new(
        dims: [usize; 3],
        spacing: [f64; 3],
        data: Vec<f64>,
        label: impl Into<String>,
    ) -> Result<Self, VolumeError> {
        let [nx, ny, nz] = dims;
        if dims.contains(&0) {
            return Err(VolumeError::EmptyExtent(dims));
        }
        if data.len() != nx * ny * nz {
            return Err(VolumeError::LengthMismatch {
                len: data.len(),
                nx,
                ny,
                nz,
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(VolumeError::NonFinite(i));
        }
        Ok(Volume {
            dims,
            spacing,
            data,
            label: label.into(),
        })
    }

    /// Volume with unit spacing.
    pub fn from_data(
        dims: [usize; 3],
        data: Vec<f64>,
        label: impl Into<String>,
    ) -> Result<Self, VolumeError> {
        Self::new(dims, [1.0; 3], data, label)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Flat index of voxel `(x, y, z)`.
    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.data[self.index(x, y, z)]
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Applies `f` voxelwise, keeping geometry and label.
    ///
    /// Non-finite results are rejected to keep the finiteness invariant.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Result<Self, VolumeError> {
        let data = self.data.iter().map(|&v| f(v)).collect();
        Self::new(self.dims, self.spacing, data, self.label.clone())
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }
}
