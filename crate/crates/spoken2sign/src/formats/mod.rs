//! File formats: keypoint streams, posterior matrices, co-articulation
//! sample sets, animation exports, and small text tables.

pub mod anim;
pub mod bvh;
pub mod keypoints;
pub mod posteriors;
pub mod samples;
pub mod tables;

/// Little-endian binary primitives shared by the binary formats.
pub(crate) mod bin {
    use crate::{Error, Result};

    pub fn w_u32(out: &mut Vec<u8>, v: u32) {
        out.extend_from_slice(&v.to_le_bytes());
    }

    pub fn w_f32(out: &mut Vec<u8>, v: f32) {
        out.extend_from_slice(&v.to_le_bytes());
    }

    pub fn w_str(out: &mut Vec<u8>, s: &str) {
        w_u32(out, s.len() as u32);
        out.extend_from_slice(s.as_bytes());
    }

    pub struct Reader<'a> {
        buf: &'a [u8],
        pos: usize,
        what: String,
    }

    impl<'a> Reader<'a> {
        pub fn new(buf: &'a [u8], what: impl Into<String>) -> Self {
            Reader {
                buf,
                pos: 0,
                what: what.into(),
            }
        }

        fn take(&mut self, n: usize) -> Result<&'a [u8]> {
            if self.pos + n > self.buf.len() {
                return Err(Error::Corrupt {
                    what: self.what.clone(),
                    message: format!(
                        "truncated: wanted {n} bytes at offset {}, file has {}",
                        self.pos,
                        self.buf.len()
                    ),
                });
            }
            let slice = &self.buf[self.pos..self.pos + n];
            self.pos += n;
            Ok(slice)
        }

        pub fn expect_magic(&mut self, magic: &[u8]) -> Result<()> {
            let got = self.take(magic.len())?;
            if got != magic {
                return Err(Error::Corrupt {
                    what: self.what.clone(),
                    message: format!("bad magic {got:02x?}"),
                });
            }
            Ok(())
        }

        pub fn u8(&mut self) -> Result<u8> {
            Ok(self.take(1)?[0])
        }

        pub fn u32(&mut self) -> Result<u32> {
            let b = self.take(4)?;
            Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        }

        pub fn f32(&mut self) -> Result<f32> {
            let b = self.take(4)?;
            Ok(f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        }

        pub fn str(&mut self) -> Result<String> {
            let len = self.u32()? as usize;
            let bytes = self.take(len)?;
            String::from_utf8(bytes.to_vec()).map_err(|_| Error::Corrupt {
                what: self.what.clone(),
                message: "non-utf8 string".into(),
            })
        }
    }
}
