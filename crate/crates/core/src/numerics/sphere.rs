use super::rng::RngStream;

/// Uniform direction on the unit `(d−1)`-sphere by normalizing a Gaussian vector.
pub fn uniform_direction(rng: &mut RngStream, out: &mut [f64]) {
    loop {
        rng.fill_normals(out);
        let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-300 {
            out.iter_mut().for_each(|v| *v /= norm);
            return;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_length_and_balanced() {
        let mut rng = RngStream::new(3, 1);
        let mut v = [0.0; 3];
        let mut mean = [0.0; 3];
        let n = 20_000;
        for _ in 0..n {
            uniform_direction(&mut rng, &mut v);
            assert!((v.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
            for i in 0..3 {
                mean[i] += v[i] / n as f64;
            }
        }
        // each coordinate has variance 1/3
        for m in mean {
            assert!(m.abs() < 4.0 * (1.0 / 3.0f64 / n as f64).sqrt());
        }
    }

    #[test]
    fn one_dimensional_signs() {
        let mut rng = RngStream::new(3, 2);
        let mut v = [0.0];
        let mut plus = 0;
        for _ in 0..10_000 {
            uniform_direction(&mut rng, &mut v);
            assert_eq!(v[0].abs(), 1.0);
            plus += usize::from(v[0] > 0.0);
        }
        assert!((4_700..5_300).contains(&plus));
    }
}
