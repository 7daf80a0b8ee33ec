//! MSB-first bit packing.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BitError {
    #[error("value {value:#x} does not fit in {width} bits")]
    Overflow { value: u64, width: u32 },
    #[error(
        "read of {width} bits at bit offset {offset} runs past the end of a {len}-byte buffer"
    )]
    Exhausted {
        offset: usize,
        width: u32,
        len: usize,
    },
}

/// Appends big-endian bit fields into a byte vector.
#[derive(Debug, Default, Clone)]
pub struct BitWriter {
    bytes: Vec<u8>,
    bit_len: usize,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bit_len(&self) -> usize {
        self.bit_len
    }

    pub fn write(&mut self, value: u64, width: u32) -> Result<(), BitError> {
        debug_assert!(width <= 64);
        if width < 64 && value >> width != 0 {
            return Err(BitError::Overflow { value, width });
        }
        for i in (0..width).rev() {
            let bit = (value >> i) & 1;
            if self.bit_len.is_multiple_of(8) {
                self.bytes.push(0);
            }
            if bit == 1 {
                let last = self.bytes.len() - 1;
                self.bytes[last] |= 0x80 >> (self.bit_len % 8);
            }
            self.bit_len += 1;
        }
        Ok(())
    }

    pub fn write_bool(&mut self, bit: bool) {
        // a single bit never overflows
        let _ = self.write(bit as u64, 1);
    }

    /// Zero-fills to the next octet boundary and returns the bytes.
    pub fn finish(self) -> Vec<u8> {
        self.bytes
    }
}

/// Reads big-endian bit fields from a byte slice.
#[derive(Debug, Clone)]
pub struct BitReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.bytes.len() * 8 - self.pos
    }

    pub fn read(&mut self, width: u32) -> Result<u64, BitError> {
        if width as usize > self.remaining() {
            return Err(BitError::Exhausted {
                offset: self.pos,
                width,
                len: self.bytes.len(),
            });
        }
        let mut v = 0u64;
        for _ in 0..width {
            let byte = self.bytes[self.pos / 8];
            let bit = (byte >> (7 - self.pos % 8)) & 1;
            v = (v << 1) | bit as u64;
            self.pos += 1;
        }
        Ok(v)
    }

    pub fn read_bool(&mut self) -> Result<bool, BitError> {
        Ok(self.read(1)? == 1)
    }
}

/// Overwrites `width` bits starting at `bit_offset` with `value`.
pub fn splice_bits(
    bytes: &mut [u8],
    bit_offset: usize,
    width: u32,
    value: u64,
) -> Result<(), BitError> {
    if width < 64 && value >> width != 0 {
        return Err(BitError::Overflow { value, width });
    }
    if bit_offset + width as usize > bytes.len() * 8 {
        return Err(BitError::Exhausted {
            offset: bit_offset,
            width,
            len: bytes.len(),
        });
    }
    for i in 0..width as usize {
        let bit = (value >> (width as usize - 1 - i)) & 1;
        let pos = bit_offset + i;
        let mask = 0x80u8 >> (pos % 8);
        if bit == 1 {
            bytes[pos / 8] |= mask;
        } else {
            bytes[pos / 8] &= !mask;
        }
    }
    Ok(())
}
