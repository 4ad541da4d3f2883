#include <cstdio>

int main() {
  std::puts("sawlab: subcommands not wired yet");
  return 0;
}
