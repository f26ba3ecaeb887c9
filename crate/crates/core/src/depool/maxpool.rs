//! Max-pooling baseline: 2x2 max for downscaling, nearest-neighbour
//! upsampling for reconstruction, nothing retained in between.

use crate::depool::pyramid::{crop, pad_to_even};
use crate::error::{Error, Result};
use crate::tensor::Field;

pub fn maxpool_forward(x: &Field) -> Result<Field> {
    let (h, w) = x.shape();
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::shape(format!("max-pooling needs even dimensions, got {h}x{w}")));
    }
    Ok(Field::from_fn(h / 2, w / 2, |i, j| {
        x.get(2 * i, 2 * j).max(x.get(2 * i, 2 * j + 1)).max(x.get(2 * i + 1, 2 * j)).max(x.get(2 * i + 1, 2 * j + 1))
    }))
}

pub fn nearest_upsample(x: &Field) -> Field {
    Field::from_fn(2 * x.height(), 2 * x.width(), |i, j| x.get(i / 2, j / 2))
}

/// Pools `levels` times and upsamples back to the input size.
pub fn maxpool_round_trip(x: &Field, levels: usize) -> Result<Field> {
    if levels == 0 {
        return Err(Error::param("levels must be at least 1"));
    }
    let (mut cur, shape) = pad_to_even(x, levels);
    for _ in 0..levels {
        cur = maxpool_forward(&cur)?;
    }
    for _ in 0..levels {
        cur = nearest_upsample(&cur);
    }
    crop(&cur, shape)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pools_block_maxima() {
        let x = Field::new(2, 4, vec![1.0, 5.0, -1.0, -2.0, 3.0, 2.0, -3.0, -4.0]).unwrap();
        let p = maxpool_forward(&x).unwrap();
        assert_eq!(p.data(), &[5.0, -1.0]);
        let u = nearest_upsample(&p);
        assert_eq!(u.shape(), (2, 4));
        assert_eq!(u.get(1, 1), 5.0);
    }

    #[test]
    fn round_trip_keeps_constants_and_shape() {
        let x = Field::filled(13, 9, 0.4);
        assert_eq!(maxpool_round_trip(&x, 3).unwrap(), x);
        assert!(maxpool_forward(&Field::zeros(3, 4)).is_err());
    }
}
