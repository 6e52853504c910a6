//! Binary model container.
//!
//! Layout, all integers `u32` and floats `f64`, little-endian:
//!
//! ```text
//! "KPHD"  version  K  M  pseudo(0|1)  hidden(0 = none)
//! input_dim  x M
//! parameters (MultiViewModel::params order, row-major weights)
//! ```

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::model::network::{Architecture, MultiViewModel};

pub const MAGIC: &[u8; 4] = b"KPHD";
pub const FORMAT_VERSION: u32 = 1;

fn io_err(e: std::io::Error) -> Error {
    Error::Format(e.to_string())
}

fn put_u32<W: Write>(w: &mut W, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Format(format!("{v} does not fit in u32")))?;
    w.write_all(&v.to_le_bytes()).map_err(io_err)
}

fn get_u32<R: Read>(r: &mut R) -> Result<usize> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(io_err)?;
    Ok(u32::from_le_bytes(b) as usize)
}

pub fn write_model<W: Write>(model: &MultiViewModel, mut w: W) -> Result<()> {
    let arch = model.architecture();
    w.write_all(MAGIC).map_err(io_err)?;
    put_u32(&mut w, FORMAT_VERSION as usize)?;
    put_u32(&mut w, arch.classes)?;
    put_u32(&mut w, arch.view_dims.len())?;
    put_u32(&mut w, usize::from(arch.pseudo_view))?;
    put_u32(&mut w, arch.hidden.unwrap_or(0))?;
    for &d in &arch.view_dims {
        put_u32(&mut w, d)?;
    }
    for p in model.params() {
        w.write_all(&p.to_le_bytes()).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn read_model<R: Read>(mut r: R) -> Result<MultiViewModel> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io_err)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let version = get_u32(&mut r)?;
    if version != FORMAT_VERSION as usize {
        return Err(Error::Format(format!("unsupported format version {version}")));
    }
    let classes = get_u32(&mut r)?;
    let views = get_u32(&mut r)?;
    let pseudo_view = match get_u32(&mut r)? {
        0 => false,
        1 => true,
        x => return Err(Error::Format(format!("pseudo flag {x} is not 0 or 1"))),
    };
    let hidden = match get_u32(&mut r)? {
        0 => None,
        h => Some(h),
    };
    let view_dims = (0..views).map(|_| get_u32(&mut r)).collect::<Result<Vec<_>>>()?;
    let arch = Architecture {
        classes,
        view_dims,
        hidden,
        pseudo_view,
    };
    let mut model = MultiViewModel::zeros(&arch)?;
    let mut params = Vec::with_capacity(model.param_count());
    let mut buf = [0u8; 8];
    for _ in 0..model.param_count() {
        r.read_exact(&mut buf).map_err(io_err)?;
        params.push(f64::from_le_bytes(buf));
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest).map_err(io_err)?;
    if !rest.is_empty() {
        return Err(Error::Format(format!("{} trailing bytes", rest.len())));
    }
    model.set_params(&params)?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_and_header() {
        let arch = Architecture {
            classes: 3,
            view_dims: vec![4, 6],
            hidden: Some(5),
            pseudo_view: true,
        };
        let model = MultiViewModel::init(&arch, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let mut buf = Vec::new();
        write_model(&model, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"KPHD");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), FORMAT_VERSION);
        assert_eq!(buf.len(), 4 + 4 * 5 + 4 * 2 + 8 * model.param_count());
        let back = read_model(buf.as_slice()).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn rejects_corruption() {
        let arch = Architecture {
            classes: 2,
            view_dims: vec![3],
            hidden: None,
            pseudo_view: false,
        };
        let model = MultiViewModel::zeros(&arch).unwrap();
        let mut buf = Vec::new();
        write_model(&model, &mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_model(bad.as_slice()).is_err());
        assert!(read_model(&buf[..buf.len() - 1]).is_err());
        let mut long = buf.clone();
        long.push(0);
        assert!(read_model(long.as_slice()).is_err());
    }
}
