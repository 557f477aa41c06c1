// Acceptance suite: one PASS/FAIL line per criterion.
#include <cstdio>
#include <cstring>

int main(int argc, char** argv) {
  (void)argc;
  (void)argv;
  std::puts("acceptance: not yet implemented");
  return 1;
}
