use planorch_core::scene::{generate_instance, Difficulty};
fn main() {
    let inst = generate_instance(0, Difficulty::Small);
    println!(
        "seed 0: elements={} category={} constraints={}",
        inst.doc.elements.len(),
        inst.instruction.category,
        inst.instruction.goal_spec.len()
    );
    println!("{}", planorch_core::util::canonical_json(&inst));
}
