fn main() {
    // CLI wired up once the io module lands.
}
