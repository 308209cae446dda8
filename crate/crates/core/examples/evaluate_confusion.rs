//! Confusion matrices, per-class accuracy and matching unsupervised codes
//! to classes.

use skelgan::eval::{hungarian_max, map_code_to_class, ConfusionMatrix};

fn main() -> skelgan::Result<()> {
    let truth = [0, 0, 1, 1, 1, 2, 2, 2, 2];
    let predicted = [0, 1, 1, 1, 2, 2, 2, 2, 0];
    let mut cm = ConfusionMatrix::new(4);
    for (&t, &p) in truth.iter().zip(&predicted) {
        cm.record(t, p);
    }
    println!("top-1 accuracy {:.3} over {} samples", cm.accuracy(), cm.total());
    for (class, acc) in cm.per_class_accuracy().iter().enumerate() {
        match acc {
            Some(a) => println!("  class {class}: {a:.3}"),
            None => println!("  class {class}: no test samples"),
        }
    }
    print!("{}", cm.to_csv());

    // Codes learned without supervision are a permutation of the classes.
    let codes = [2, 2, 0, 0, 0, 1, 1, 1, 0];
    let mapping = map_code_to_class(&codes, &truth, 3)?;
    println!("class of each code: {:?}", mapping.class_of_code);

    let weights = ndarray::array![[1.0, 5.0, 0.0], [4.0, 0.0, 1.0], [0.0, 2.0, 3.0]];
    println!("max-weight assignment: {:?}", hungarian_max(&weights));
    Ok(())
}
