//! Inputs shared by the criterion benches.

/// `n` lines of the kind a symbolic program prints, with negative powers,
/// `**`, blank lines and a marker every tenth line.
pub fn filter_corpus(n: usize) -> String {
    let mut s = String::new();
    for i in 0..n {
        match i % 10 {
            0 => s.push('\n'),
            9 => s.push_str("x$\n"),
            k => s.push_str(&format!("a^-{k}*b**{k} + (c+d)^-{i} - e^{k}\n")),
        }
    }
    s
}

/// A reply of `lines` lines followed by an empty prompt line.
pub fn framed_reply(lines: usize) -> Vec<u8> {
    let mut s = Vec::new();
    for i in 0..lines {
        s.extend_from_slice(format!("+ {i}*d^{i}\n").as_bytes());
    }
    s.push(b'\n');
    s
}

#[cfg(test)]
mod tests {
    #[test]
    fn corpus_shape() {
        let c = super::filter_corpus(20);
        assert_eq!(c.lines().count(), 20);
        assert_eq!(c.lines().filter(|l| l.is_empty()).count(), 2);
        let r = super::framed_reply(3);
        assert!(r.ends_with(b"\n\n"));
        assert_eq!(r.split(|&b| b == b'\n').count(), 5);
    }
}
