//! Payload and sample text formats at the CLI boundary.
//!
//! Payloads are bit strings (`0100111...`) or hex strings; a hex payload of
//! `B` bits has `ceil(B/4)` digits, is read most significant digit first,
//! and its `4*ceil(B/4) - B` leading pad bits must be zero. Received-signal
//! files carry one complex sample per line as `re im` (or `re,im`); blank
//! lines and `#` comments are ignored.

use num_complex::Complex64;

pub fn parse_bits(s: &str) -> Result<Vec<u8>, String> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            other => Err(format!("bit string contains {other:?}")),
        })
        .collect()
}

pub fn bits_to_string(bits: &[u8]) -> String {
    bits.iter().map(|&b| if b == 0 { '0' } else { '1' }).collect()
}

pub fn parse_hex(s: &str, n_bits: usize) -> Result<Vec<u8>, String> {
    let digits = n_bits.div_ceil(4);
    if s.len() != digits {
        return Err(format!(
            "hex payload for {n_bits} bits needs {digits} digits, got {}",
            s.len()
        ));
    }
    let mut bits = Vec::with_capacity(4 * digits);
    for c in s.chars() {
        let v = c.to_digit(16).ok_or_else(|| format!("bad hex digit {c:?}"))? as u8;
        for k in (0..4).rev() {
            bits.push((v >> k) & 1);
        }
    }
    let pad = 4 * digits - n_bits;
    if bits[..pad].iter().any(|&b| b != 0) {
        return Err(format!("hex payload exceeds {n_bits} bits (nonzero pad)"));
    }
    Ok(bits.split_off(pad))
}

pub fn bits_to_hex(bits: &[u8]) -> String {
    let pad = (4 - bits.len() % 4) % 4;
    let padded: Vec<u8> = std::iter::repeat_n(0u8, pad).chain(bits.iter().copied()).collect();
    padded
        .chunks(4)
        .map(|nibble| {
            let v = nibble.iter().fold(0u32, |acc, &b| (acc << 1) | u32::from(b));
            char::from_digit(v, 16).unwrap()
        })
        .collect()
}

pub fn parse_iq(text: &str) -> Result<Vec<Complex64>, String> {
    let mut samples = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty());
        let re: f64 = parts
            .next()
            .ok_or_else(|| format!("line {}: empty sample", ln + 1))?
            .parse()
            .map_err(|e| format!("line {}: {e}", ln + 1))?;
        let im: f64 = match parts.next() {
            Some(tok) => tok.parse().map_err(|e| format!("line {}: {e}", ln + 1))?,
            None => 0.0,
        };
        if parts.next().is_some() {
            return Err(format!("line {}: more than two fields", ln + 1));
        }
        samples.push(Complex64::new(re, im));
    }
    Ok(samples)
}

pub fn format_iq(samples: &[Complex64]) -> String {
    let mut out = String::new();
    for z in samples {
        out.push_str(&format!("{:.17e} {:.17e}\n", z.re, z.im));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bit_strings_round_trip() {
        let bits = parse_bits("0110").unwrap();
        assert_eq!(bits, vec![0, 1, 1, 0]);
        assert_eq!(bits_to_string(&bits), "0110");
        assert!(parse_bits("01x").is_err());
    }

    #[test]
    fn hex_round_trips_with_padding() {
        // 5 bits -> 2 hex digits, 3 pad bits.
        let bits = parse_hex("1f", 5).unwrap();
        assert_eq!(bits, vec![1, 1, 1, 1, 1]);
        assert_eq!(bits_to_hex(&bits), "1f");
        assert!(parse_hex("3f", 5).is_err()); // nonzero pad bit
        assert!(parse_hex("f", 5).is_err()); // wrong digit count
        let bits = parse_hex("a3c", 12).unwrap();
        assert_eq!(bits_to_hex(&bits), "a3c");
    }

    #[test]
    fn iq_text_round_trips() {
        let samples = vec![Complex64::new(1.5, -0.25), Complex64::new(0.0, 2.0)];
        let text = format_iq(&samples);
        assert_eq!(parse_iq(&text).unwrap(), samples);
        let with_comments = format!("# header\n\n{text}");
        assert_eq!(parse_iq(&with_comments).unwrap(), samples);
        assert_eq!(parse_iq("1.0, 2.0").unwrap(), vec![Complex64::new(1.0, 2.0)]);
        assert!(parse_iq("1 2 3").is_err());
    }
}
