// Small mixed workload: object allocation, closures and numeric loops.
function fib(n) { return n < 2 ? n : fib(n - 1) + fib(n - 2); }
function build(n) {
  const out = [];
  for (let i = 0; i < n; i++) out.push({ id: i, tag: "n" + i, next: null });
  for (let i = 1; i < n; i++) out[i - 1].next = out[i];
  return out;
}
let acc = 0;
for (let round = 0; round < 20; round++) {
  acc += fib(22);
  const list = build(20000);
  let node = list[0];
  while (node) { acc += node.id & 7; node = node.next; }
  acc += list.map((o) => o.tag.length).reduce((a, b) => a + b, 0);
}
if (acc === 42) console.log("unlikely");
