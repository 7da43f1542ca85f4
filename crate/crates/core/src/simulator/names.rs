use rand::seq::index;
use rand::Rng;

const FIRST: [&str; 40] = [
    "Robert", "Mary", "James", "Patricia", "John", "Jennifer", "Michael", "Linda", "David", "Elizabeth",
    "William", "Barbara", "Richard", "Susan", "Joseph", "Jessica", "Thomas", "Sarah", "Charles", "Karen",
    "Troy", "Nancy", "Daniel", "Lisa", "Matthew", "Betty", "Anthony", "Sandra", "Mark", "Ashley",
    "Steven", "Kimberly", "Paul", "Emily", "Andrew", "Donna", "Joshua", "Michelle", "Kevin", "Carol",
];

const LAST: [&str; 40] = [
    "North", "Donovan", "Smith", "Johnson", "Williams", "Brown", "Jones", "Garcia", "Miller", "Davis",
    "Rodriguez", "Martinez", "Hernandez", "Lopez", "Gonzalez", "Wilson", "Anderson", "Taylor", "Moore", "Jackson",
    "Martin", "Lee", "Perez", "Thompson", "White", "Harris", "Sanchez", "Clark", "Ramirez", "Lewis",
    "Robinson", "Walker", "Young", "Allen", "King", "Wright", "Scott", "Torres", "Nguyen", "Hill",
];

fn combo(i: usize) -> String {
    format!("{} {}", FIRST[i % FIRST.len()], LAST[i / FIRST.len()])
}

/// `n` distinct full names.
pub(crate) fn distinct_names<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<String> {
    let pool = FIRST.len() * LAST.len();
    if n <= pool {
        index::sample(rng, pool, n).into_iter().map(combo).collect()
    } else {
        // large populations: append a numeric suffix once the pool is exhausted
        (0..n)
            .map(|i| if i < pool { combo(i) } else { format!("{} {}", combo(i % pool), i / pool + 1) })
            .collect()
    }
}

const ALNUM: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789";

pub(crate) fn session_token<R: Rng + ?Sized>(rng: &mut R) -> String {
    (0..12).map(|_| ALNUM[rng.random_range(0..ALNUM.len())] as char).collect()
}
