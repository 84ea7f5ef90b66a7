use std::path::Path;

use image::{ColorType, ImageFormat, ImageReader, RgbImage};

use super::TexelGrid;
use crate::error::{Error, Result};

/// Writes an 8-bit RGB PNG. The coverage mask is not stored.
pub fn write_image(grid: &TexelGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let img = RgbImage::from_raw(grid.width, grid.height, grid.data.clone())
        .ok_or_else(|| Error::Dimension("texel buffer does not match image size".into()))?;
    img.save_with_format(path, ImageFormat::Png)?;
    Ok(())
}

/// Reads an 8-bit RGB PNG; every texel of the result is marked covered.
pub fn read_image(path: impl AsRef<Path>) -> Result<TexelGrid> {
    let path = path.as_ref();
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    if reader.format() != Some(ImageFormat::Png) {
        return Err(Error::UnsupportedFormat(format!("{}: not a PNG", path.display())));
    }
    let img = reader.decode()?;
    if img.color() != ColorType::Rgb8 {
        return Err(Error::UnsupportedFormat(format!(
            "{}: expected 8-bit RGB, found {:?}",
            path.display(),
            img.color()
        )));
    }
    let rgb = img.into_rgb8();
    let (width, height) = rgb.dimensions();
    Ok(TexelGrid {
        width,
        height,
        data: rgb.into_raw(),
        coverage: vec![true; width as usize * height as usize],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn roundtrip(g: &TexelGrid) -> TexelGrid {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.png");
        write_image(g, &p).unwrap();
        read_image(&p).unwrap()
    }

    #[test]
    fn two_by_two_is_exact() {
        let mut g = TexelGrid::new(2, 2);
        g.set(0, 0, [255, 0, 0]);
        g.set(1, 0, [0, 255, 0]);
        g.set(0, 1, [0, 0, 255]);
        g.set(1, 1, [1, 2, 3]);
        assert_eq!(roundtrip(&g).data, g.data);
    }

    #[test]
    fn black_512_decodes_to_zeros() {
        let g = TexelGrid::new(512, 512);
        let back = roundtrip(&g);
        assert_eq!((back.width, back.height), (512, 512));
        assert!(back.data.iter().all(|&b| b == 0));
    }

    #[test]
    fn rgba_is_unsupported() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.png");
        image::RgbaImage::new(4, 4).save(&p).unwrap();
        assert!(matches!(read_image(&p), Err(Error::UnsupportedFormat(_))));
        let p16 = dir.path().join("b.png");
        image::ImageBuffer::<image::Rgb<u16>, Vec<u16>>::new(4, 4).save(&p16).unwrap();
        assert!(matches!(read_image(&p16), Err(Error::UnsupportedFormat(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn random_64_roundtrip(data in proptest::collection::vec(any::<u8>(), 64 * 64 * 3)) {
            let g = TexelGrid { width: 64, height: 64, data, coverage: vec![true; 64 * 64] };
            prop_assert_eq!(roundtrip(&g), g);
        }
    }
}
