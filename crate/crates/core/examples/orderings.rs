// Sequence spaces, generation orders and order banks.

use tube::seqspace::{OrderBank, Regime, SeqSpace, Sequence};

pub fn run_example() -> tube::Result<()> {
    let space = SeqSpace::new(3, 8, 4)?;
    println!("V=3, L=8, L'=4: {} blocks, |X| = {:?}", space.num_blocks(), space.cardinality());

    let x = Sequence::new(&space, vec![0, 2, 1, 1, 2, 0, 0, 1])?;
    for (b, block) in x.blocks(&space).iter().enumerate() {
        println!("block {b}: tokens {:?}, previous {:?}", block.tokens, block.prev);
    }

    let n = space.block_size();
    for regime in ["ao-arm", "mdm:1", "mdm:2", "mdm:4"] {
        let regime: Regime = regime.parse()?;
        println!("{regime}: support {:?}", regime.support_size(n));
    }

    let masked = Regime::Masked { steps: 2 };
    let bank = OrderBank::sample(masked, n, 3, 17);
    print!("{}", bank.to_text());
    let full = Regime::AnyOrder.enumerate(n)?;
    println!("enumerated any-order bank: {} orderings, weights sum to {}", full.len(), full.weights().iter().sum::<f64>());
    Ok(())
}

fn main() -> tube::Result<()> {
    run_example()
}
