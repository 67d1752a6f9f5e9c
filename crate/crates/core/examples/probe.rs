// scratch diagnostic probe (deleted before release)
use srldpc_core::amp::{self, DecoderConfig, UserCodebook};
use srldpc_core::channel;
use srldpc_core::galois::FieldTable;
use srldpc_core::nbldpc::LdpcCode;
use srldpc_core::seeding::{self, tag};
use srldpc_core::sparc::{self, SensingMatrix};
use rand::Rng;

fn main() {
    let field = FieldTable::with_default_modulus(2).unwrap();
    let code = LdpcCode::build(field, 6, 2, 2, 1).unwrap();
    let users = 2;
    let n = 96;
    let mats: Vec<SensingMatrix> = (0..users)
        .map(|k| {
            let seed = seeding::derive_seed(9, &[tag::MATRIX, k as u64]);
            SensingMatrix::sample(seed, n, 6, 4).unwrap()
        })
        .collect();
    for trial in 0..30u64 {
        let mut rng = seeding::stream(9, &[tag::TRIAL, 0, trial]);
        let messages: Vec<Vec<u8>> = (0..users)
            .map(|_| (0..8).map(|_| rng.random::<bool>() as u8).collect())
            .collect();
        let signals: Vec<Vec<f64>> = messages
            .iter()
            .enumerate()
            .map(|(k, bits)| {
                let symbols = sparc::bits_to_symbols(bits, 2);
                let v = code.encode(&symbols).unwrap();
                sparc::sr_encode(&mats[k], &sparc::to_sparse(&v, 4))
            })
            .collect();
        let y = channel::gmac_transmit(&signals, 0.0, &mut rng);
        let cbs: Vec<UserCodebook> = (0..users)
            .map(|k| UserCodebook { user_id: k, matrix: &mats[k], code: &code })
            .collect();
        let cfg = DecoderConfig { t_amp: 25, early_stop: true, ..DecoderConfig::default() };
        let res = amp::decode_single_cell(&y, &cbs, 0.0, &cfg);
        let errs: usize = res
            .users
            .iter()
            .enumerate()
            .map(|(k, u)| {
                u.info_bits.iter().zip(&messages[k]).filter(|(a, b)| a != b).count()
            })
            .sum();
        if errs > 0 {
            println!("trial {trial}: {errs} bit errors");
            for rec in &res.diagnostics.iterations {
                println!(
                    "  t={:2} tau2={:.3e} syn={:?}",
                    rec.t, rec.tau2[0], rec.syndrome_ok
                );
            }
        }
    }
    println!("done");
}
