//! Monte Carlo check of a fading channel model: channel-state frequencies
//! against their distributions and packet success against `1 − p_h`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sensor_sched::harness::generate_system;

const DRAWS: usize = 100_000;

fn main() -> sensor_sched::Result<()> {
    let channels = generate_system(1, 2, 2)?.channels;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let h_bar = channels.h_bar() as usize;
    let mut counts = vec![vec![0usize; h_bar]; 4];
    for _ in 0..DRAWS {
        let h = channels.sample_channel_matrix(&mut rng);
        for (pair, &state) in h.as_slice().iter().enumerate() {
            counts[pair][state as usize - 1] += 1;
        }
    }
    println!("channel-state frequencies over {DRAWS} draws (empirical / q)");
    for (pair, row) in counts.iter().enumerate() {
        let (n, m) = (pair / 2, pair % 2);
        let q = channels.distribution(n, m);
        let cells: Vec<String> = row
            .iter()
            .zip(q)
            .map(|(&c, &p)| format!("{:.3}/{p:.3}", c as f64 / DRAWS as f64))
            .collect();
        println!("  sensor {} channel {}: {}", n + 1, m + 1, cells.join("  "));
    }

    println!("packet success per channel state (empirical / 1 − p_h)");
    for h in 1..=channels.h_bar() {
        let mut ok = 0usize;
        for _ in 0..DRAWS {
            ok += channels.packet_delivered(h, &mut rng)? as usize;
        }
        println!(
            "  h={h}: {:.4} / {:.4}",
            ok as f64 / DRAWS as f64,
            1.0 - channels.drop_prob(h)?
        );
    }
    Ok(())
}
