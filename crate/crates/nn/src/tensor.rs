//! Dense parameter tensors and channel-major feature maps.

use qsm_core::volume::Volume3;

use crate::error::{Error, Result};

/// A named-shape parameter tensor, always f64.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; len],
        }
    }

    pub fn from_data(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        if shape.iter().product::<usize>() != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "shape {:?} needs {} values, got {}",
                shape,
                shape.iter().product::<usize>(),
                data.len()
            )));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Elementwise in-place accumulate.
    pub fn accumulate(&mut self, other: &Tensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch(format!(
                "{:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += b;
        }
        Ok(())
    }

    pub fn scale_in_place(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }
}

/// Multi-channel 3D feature map. Channel-major storage: channel `c` occupies
/// one contiguous x-fastest volume of `nx*ny*nz` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    channels: usize,
    dims: [usize; 3],
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn zeros(channels: usize, dims: [usize; 3]) -> Self {
        Self {
            channels,
            dims,
            data: vec![0.0; channels * dims[0] * dims[1] * dims[2]],
        }
    }

    pub fn from_data(channels: usize, dims: [usize; 3], data: Vec<f64>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::ShapeMismatch("channel count must be >= 1".into()));
        }
        if data.len() != channels * dims[0] * dims[1] * dims[2] {
            return Err(Error::ShapeMismatch(format!(
                "feature map {}x{:?} needs {} samples, got {}",
                channels,
                dims,
                channels * dims[0] * dims[1] * dims[2],
                data.len()
            )));
        }
        Ok(Self {
            channels,
            dims,
            data,
        })
    }

    /// Single-channel map sharing the volume's sample layout.
    pub fn from_volume(v: &Volume3) -> Self {
        Self {
            channels: 1,
            dims: v.dims(),
            data: v.data().to_vec(),
        }
    }

    /// Extracts one channel as a volume with the given voxel size.
    pub fn channel_volume(&self, c: usize, voxel_size: [f64; 3]) -> Result<Volume3> {
        Ok(Volume3::from_data(
            self.dims,
            voxel_size,
            self.channel(c).to_vec(),
        )?)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    /// Samples per channel.
    pub fn volume_len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.volume_len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.volume_len();
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn same_shape(&self, other: &FeatureMap) -> bool {
        self.channels == other.channels && self.dims == other.dims
    }

    pub fn add(&self, other: &FeatureMap) -> Result<FeatureMap> {
        if !self.same_shape(other) {
            return Err(Error::ShapeMismatch(format!(
                "{}x{:?} vs {}x{:?}",
                self.channels, self.dims, other.channels, other.dims
            )));
        }
        let data = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a + b)
            .collect();
        Ok(FeatureMap {
            channels: self.channels,
            dims: self.dims,
            data,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensor_shape_checks() {
        assert!(Tensor::from_data(&[2, 3], vec![0.0; 6]).is_ok());
        assert!(Tensor::from_data(&[2, 3], vec![0.0; 5]).is_err());
        let mut a = Tensor::zeros(&[2, 2]);
        let b = Tensor::from_data(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        a.accumulate(&b).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn feature_map_channel_layout() {
        let mut f = FeatureMap::zeros(2, [2, 2, 2]);
        f.channel_mut(1)[0] = 5.0;
        assert_eq!(f.data()[8], 5.0);
        assert_eq!(f.channel(0).len(), 8);
    }
}
