// Population bounds on Toy-A, the two-position model whose orderings disagree.
//
// Prints the exact log-likelihood of every sequence together with the
// lower (ELBO) and upper (TUBE, CUBO, TVO) population bounds.

use tube::estimators::Population;
use tube::seqspace::{Regime, Sequence};
use tube::toy::toy_a;

pub fn run_example() -> tube::Result<()> {
    let model = toy_a();
    let space = *model.space();
    println!("{:<4} {:>10} {:>10} {:>10} {:>10} {:>10}", "x", "ELBO", "exact", "TUBE", "CUBO_2", "TVO_200");
    for x in Sequence::enumerate(&space)? {
        let block = x.blocks(&space)[0];
        let pop = Population::enumerate(&model, block, Regime::AnyOrder)?;
        // the ELBO is a natural surrogate; TUBE then sits above the exact value
        let log_psi = pop.elbo();
        let name: String = x.tokens().iter().map(|&t| if t == 0 { 'A' } else { 'B' }).collect();
        println!(
            "{name:<4} {:>10.6} {:>10.6} {:>10.6} {:>10.6} {:>10.6}",
            pop.elbo(),
            pop.exact(),
            pop.tube(log_psi),
            pop.cubo(2.0),
            pop.tvo(200)
        );
        assert!(pop.elbo() <= pop.exact() && pop.exact() <= pop.tube(log_psi));
    }
    Ok(())
}

fn main() -> tube::Result<()> {
    run_example()
}
