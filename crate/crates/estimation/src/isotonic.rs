/// Weighted least-squares projection onto non-increasing sequences.
pub fn decreasing(y: &[f64], w: &[f64]) -> Vec<f64> {
    // blocks of (mean, weight, length)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(y.len());
    for (v, wt) in y.iter().zip(w) {
        blocks.push((*v, *wt, 1));
        while blocks.len() > 1 {
            let (m1, w1, n1) = blocks[blocks.len() - 2];
            let (m2, w2, n2) = blocks[blocks.len() - 1];
            if m1 >= m2 {
                break;
            }
            blocks.truncate(blocks.len() - 2);
            let wsum = w1 + w2;
            let mean = if wsum > 0.0 { (m1 * w1 + m2 * w2) / wsum } else { (m1 + m2) / 2.0 };
            blocks.push((mean, wsum, n1 + n2));
        }
    }
    blocks.into_iter().flat_map(|(m, _, n)| std::iter::repeat_n(m, n)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pools_violators() {
        assert_eq!(decreasing(&[3.0, 1.0, 2.0], &[1.0, 1.0, 1.0]), vec![3.0, 1.5, 1.5]);
        assert_eq!(decreasing(&[1.0, 2.0], &[3.0, 1.0]), vec![1.25, 1.25]);
        assert_eq!(decreasing(&[5.0, 4.0], &[1.0, 1.0]), vec![5.0, 4.0]);
    }
}
