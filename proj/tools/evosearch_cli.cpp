#include <cstdio>

int main() {
  std::puts("evosearch: subcommands pending");
  return 0;
}
