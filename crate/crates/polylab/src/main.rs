fn main() {
    println!("polylab CLI: under construction");
}
